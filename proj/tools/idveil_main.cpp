// idveil command-line front end. Subcommands map one-to-one onto the
// workflow entry points; every option may also come from --config, with
// explicit flags taking precedence over file values.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "idveil/pipeline/workflow.hpp"
#include "idveil/version.hpp"

namespace {

// Options shared by every subcommand. Only values the user actually passed
// are folded into the key-value config, so file settings survive untouched.
struct CommonFlags {
  std::string config;
  std::string backend;
  std::string data;
  std::string labels;
  std::string out;
  std::string mode;
  std::int64_t seed = 0;
  int workers = 0;
  std::vector<std::string> sets;  // raw key=value overrides
};

void add_common(CLI::App* cmd, CommonFlags* f, bool with_mode) {
  cmd->add_option("--config", f->config, "Key-value config file")
      ->check(CLI::ExistingFile);
  cmd->add_option("--backend", f->backend,
                  "Backend spec: synthetic, synthetic:<file> or onnx:<descriptor>");
  cmd->add_option("--data", f->data, "Directory of input images");
  cmd->add_option("--labels", f->labels, "Labels file for the input images");
  cmd->add_option("--seed", f->seed, "Top-level random seed");
  cmd->add_option("--out", f->out, "Output directory");
  cmd->add_option("--workers", f->workers, "Worker threads (0 = hardware count)");
  cmd->add_option("--set", f->sets, "Extra config override, key=value (repeatable)");
  if (with_mode) {
    cmd->add_option("--mode", f->mode, "Anonymization mode: layers, channels, mask, swapper");
  }
}

bool passed(const CLI::App* cmd, const std::string& name) {
  const CLI::Option* opt = cmd->get_option_no_throw(name);
  return opt != nullptr && opt->count() > 0;
}

idveil::RunConfig build_config(const CLI::App* cmd, const CommonFlags& f) {
  idveil::KvConfig kv;
  if (!f.config.empty()) kv = idveil::KvConfig::parse_file(f.config);
  if (passed(cmd, "--backend")) kv.set("backend", f.backend);
  if (passed(cmd, "--data")) kv.set("data_dir", f.data);
  if (passed(cmd, "--labels")) kv.set("labels", f.labels);
  if (passed(cmd, "--seed")) kv.set("seed", std::to_string(f.seed));
  if (passed(cmd, "--out")) kv.set("out_dir", f.out);
  if (passed(cmd, "--workers")) kv.set("workers", std::to_string(f.workers));
  if (passed(cmd, "--mode")) kv.set("mode", f.mode);
  for (const std::string& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw idveil::ConfigError("--set expects key=value, got '" + s + "'");
    }
    kv.set(idveil::detail::trim(s.substr(0, eq)), idveil::detail::trim(s.substr(eq + 1)));
  }
  return idveil::RunConfig::from_kv(kv);
}

void report(const idveil::WorkflowResult& res) {
  if (res.summary.contains("warning")) {
    std::cerr << "warning: " << res.summary["warning"].get<std::string>() << "\n";
  }
  std::cout << res.workflow << ": " << res.images << " images, " << res.outputs.size()
            << " artifacts\n";
  for (const auto& [key, value] : res.summary.items()) {
    if (key == "warning") continue;
    std::cout << "  " << key << " = " << value.dump() << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feature-preserving face anonymization in a generative latent space"};
  app.set_version_flag("--version", std::string("idveil ") + idveil::kVersion);
  app.require_subcommand(1);

  CommonFlags flags;
  CLI::App* search_layers =
      app.add_subcommand("search-layers", "Score layer swap windows for identity leverage");
  CLI::App* search_channels =
      app.add_subcommand("search-channels", "Scan channel blocks for identity leverage");
  CLI::App* anonymize =
      app.add_subcommand("anonymize", "Anonymize a folder of images in the chosen mode");
  CLI::App* train_swapper =
      app.add_subcommand("train-swapper", "Train the latent swapper on mask-based ground truth");
  CLI::App* evaluate =
      app.add_subcommand("evaluate", "Score an anonymization run against its originals");
  add_common(search_layers, &flags, false);
  add_common(search_channels, &flags, false);
  add_common(anonymize, &flags, true);
  add_common(train_swapper, &flags, false);
  add_common(evaluate, &flags, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // bad usage is a configuration problem
  }

  try {
    const CLI::App* cmd = app.get_subcommands().front();
    idveil::RunConfig cfg = build_config(cmd, flags);
    idveil::WorkflowResult res;
    if (cmd == search_layers) {
      res = idveil::search_layers_workflow(cfg);
    } else if (cmd == search_channels) {
      res = idveil::search_channels_workflow(cfg);
    } else if (cmd == anonymize) {
      res = idveil::run_workflow(cfg);
    } else if (cmd == train_swapper) {
      cfg.mode = "swapper";
      res = idveil::train_swapper_workflow(cfg);
    } else {
      res = idveil::evaluate_workflow(cfg);
    }
    report(res);
    return 0;
  } catch (const idveil::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const idveil::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const idveil::BackendError& e) {
    std::cerr << "backend error: " << e.what() << "\n";
    return 4;
  } catch (const idveil::TrainingDiverged& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
