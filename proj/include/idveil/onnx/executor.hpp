#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "idveil/core/errors.hpp"
#include "idveil/onnx/model.hpp"

// Feed-forward evaluator for loaded model graphs. The supported operator set
// covers fully connected networks with the usual activations: Gemm, MatMul,
// Add, Mul, Relu, LeakyRelu, Sigmoid, Tanh, Flatten, Reshape, Identity.
// Nodes run in listed order, which the exporter guarantees is topological.

namespace idveil::onnx {

// Runtime tensor: row-major float32 data plus its shape.
struct Value {
  std::vector<std::int64_t> dims;
  std::vector<float> data;

  static Value row(std::vector<float> data) {
    Value v;
    v.dims = {1, static_cast<std::int64_t>(data.size())};
    v.data = std::move(data);
    return v;
  }

  std::size_t size() const { return data.size(); }
};

namespace detail {

inline std::size_t dims_count(const std::vector<std::int64_t>& dims) {
  std::size_t n = 1;
  for (std::int64_t d : dims) n *= static_cast<std::size_t>(d);
  return n;
}

inline void require_matrix(const Value& v, const std::string& who) {
  if (v.dims.size() != 2) {
    throw BackendError(who + ": expected a rank-2 tensor, got rank " +
                       std::to_string(v.dims.size()));
  }
}

// C = A·B with optional transposes, both operands rank 2.
inline Value matmul(const Value& a, bool trans_a, const Value& b, bool trans_b,
                    const std::string& who) {
  require_matrix(a, who);
  require_matrix(b, who);
  const std::int64_t m = trans_a ? a.dims[1] : a.dims[0];
  const std::int64_t ka = trans_a ? a.dims[0] : a.dims[1];
  const std::int64_t kb = trans_b ? b.dims[1] : b.dims[0];
  const std::int64_t n = trans_b ? b.dims[0] : b.dims[1];
  if (ka != kb) {
    throw BackendError(who + ": inner dimensions disagree, " + std::to_string(ka) +
                       " vs " + std::to_string(kb));
  }
  Value out;
  out.dims = {m, n};
  out.data.assign(static_cast<std::size_t>(m) * n, 0.0f);
  const auto at = [](const Value& v, std::int64_t r, std::int64_t c, bool t) {
    return t ? v.data[static_cast<std::size_t>(c) * v.dims[1] + r]
             : v.data[static_cast<std::size_t>(r) * v.dims[1] + c];
  };
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t k = 0; k < ka; ++k) {
      const float aik = at(a, i, k, trans_a);
      for (std::int64_t j = 0; j < n; ++j) {
        out.data[static_cast<std::size_t>(i) * n + j] += aik * at(b, k, j, trans_b);
      }
    }
  }
  return out;
}

}  // namespace detail

class Executor {
 public:
  explicit Executor(GraphDef graph) : graph_(std::move(graph)) {
    for (std::size_t i = 0; i < graph_.initializers.size(); ++i) {
      if (!initializer_index_.emplace(graph_.initializers[i].name, i).second) {
        throw IoError("graph '" + graph_.name + "': duplicate initializer '" +
                      graph_.initializers[i].name + "'");
      }
    }
    for (const auto& node : graph_.nodes) {
      if (!kSupportedOps.contains(node.op_type)) {
        throw BackendError("graph '" + graph_.name + "': unsupported operator '" +
                           node.op_type + "'");
      }
      if (node.outputs.empty()) {
        throw IoError("graph '" + graph_.name + "': node '" + node.name + "' has no output");
      }
    }
  }

  const GraphDef& graph() const { return graph_; }

  // Graph inputs that must be fed at run time, i.e. not backed by initializers.
  std::vector<std::string> feed_names() const {
    std::vector<std::string> names;
    for (const auto& in : graph_.inputs) {
      if (!initializer_index_.contains(in)) names.push_back(in);
    }
    return names;
  }

  std::map<std::string, Value> run(const std::map<std::string, Value>& feeds) const {
    std::map<std::string, Value> env;
    for (const auto& t : graph_.initializers) {
      if (t.data_type != 1) continue;  // int64 tensors only serve as Reshape shapes
      Value v;
      v.dims = t.dims;
      v.data = t.values;
      env.emplace(t.name, std::move(v));
    }
    for (const auto& [name, value] : feeds) {
      if (value.data.size() != detail::dims_count(value.dims)) {
        throw BackendError("fed tensor '" + name + "': data size does not match dims");
      }
      env[name] = value;
    }
    for (const auto& name : feed_names()) {
      if (!feeds.contains(name)) {
        throw BackendError("graph '" + graph_.name + "': input '" + name + "' was not fed");
      }
    }
    for (const auto& node : graph_.nodes) {
      env[node.outputs[0]] = eval_node(node, env);
    }
    std::map<std::string, Value> out;
    for (const auto& name : graph_.outputs) {
      const auto it = env.find(name);
      if (it == env.end()) {
        throw BackendError("graph '" + graph_.name + "': output '" + name +
                           "' was never produced");
      }
      out.emplace(name, it->second);
    }
    return out;
  }

  // Convenience path for the common single-input, single-output component.
  Value run_single(const Value& input) const {
    const auto names = feed_names();
    if (names.size() != 1) {
      throw BackendError("graph '" + graph_.name + "': expected exactly one input, found " +
                         std::to_string(names.size()));
    }
    if (graph_.outputs.size() != 1) {
      throw BackendError("graph '" + graph_.name + "': expected exactly one output, found " +
                         std::to_string(graph_.outputs.size()));
    }
    auto out = run({{names[0], input}});
    return std::move(out.at(graph_.outputs[0]));
  }

 private:
  inline static const std::set<std::string> kSupportedOps = {
      "Gemm", "MatMul", "Add", "Mul", "Relu", "LeakyRelu",
      "Sigmoid", "Tanh", "Flatten", "Reshape", "Identity"};

  const Value& operand(const GraphNode& node, std::size_t i,
                       const std::map<std::string, Value>& env) const {
    if (i >= node.inputs.size()) {
      throw BackendError("node '" + node.name + "' (" + node.op_type + "): missing input " +
                         std::to_string(i));
    }
    const auto it = env.find(node.inputs[i]);
    if (it == env.end()) {
      throw BackendError("node '" + node.name + "' (" + node.op_type + "): input tensor '" +
                         node.inputs[i] + "' is not available");
    }
    return it->second;
  }

  Value eval_node(const GraphNode& node, const std::map<std::string, Value>& env) const {
    const std::string who = "node '" + node.name + "' (" + node.op_type + ")";
    if (node.op_type == "Gemm") return eval_gemm(node, env, who);
    if (node.op_type == "MatMul") {
      return detail::matmul(operand(node, 0, env), false, operand(node, 1, env), false, who);
    }
    if (node.op_type == "Add") return eval_binary(node, env, who, /*multiply=*/false);
    if (node.op_type == "Mul") return eval_binary(node, env, who, /*multiply=*/true);
    if (node.op_type == "Relu") {
      return eval_unary(node, env, [](float x) { return x > 0.0f ? x : 0.0f; });
    }
    if (node.op_type == "LeakyRelu") {
      const float alpha = node.attr_f("alpha", 0.01f);
      return eval_unary(node, env, [alpha](float x) { return x > 0.0f ? x : alpha * x; });
    }
    if (node.op_type == "Sigmoid") {
      return eval_unary(node, env, [](float x) { return 1.0f / (1.0f + std::exp(-x)); });
    }
    if (node.op_type == "Tanh") {
      return eval_unary(node, env, [](float x) { return std::tanh(x); });
    }
    if (node.op_type == "Flatten") return eval_flatten(node, env, who);
    if (node.op_type == "Reshape") return eval_reshape(node, env, who);
    if (node.op_type == "Identity") return operand(node, 0, env);
    throw BackendError(who + ": unsupported operator");
  }

  Value eval_gemm(const GraphNode& node, const std::map<std::string, Value>& env,
                  const std::string& who) const {
    const float alpha = node.attr_f("alpha", 1.0f);
    const float beta = node.attr_f("beta", 1.0f);
    const bool trans_a = node.attr_i("transA", 0) != 0;
    const bool trans_b = node.attr_i("transB", 0) != 0;
    Value y = detail::matmul(operand(node, 0, env), trans_a, operand(node, 1, env), trans_b, who);
    for (float& v : y.data) v *= alpha;
    if (node.inputs.size() >= 3 && !node.inputs[2].empty()) {
      const Value& c = operand(node, 2, env);
      const std::int64_t m = y.dims[0];
      const std::int64_t n = y.dims[1];
      if (static_cast<std::int64_t>(c.size()) == m * n) {
        for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += beta * c.data[i];
      } else if (static_cast<std::int64_t>(c.size()) == n) {
        for (std::int64_t i = 0; i < m; ++i) {
          for (std::int64_t j = 0; j < n; ++j) {
            y.data[static_cast<std::size_t>(i) * n + j] += beta * c.data[static_cast<std::size_t>(j)];
          }
        }
      } else {
        throw BackendError(who + ": bias shape does not broadcast onto the product");
      }
    }
    return y;
  }

  // Elementwise add or multiply. Besides same-shape operands, the usual bias
  // broadcasts are accepted: a scalar, or a vector over the last axis.
  Value eval_binary(const GraphNode& node, const std::map<std::string, Value>& env,
                    const std::string& who, bool multiply) const {
    const Value& a = operand(node, 0, env);
    const Value& b = operand(node, 1, env);
    Value out = a;
    const auto apply = [multiply](float x, float y) { return multiply ? x * y : x + y; };
    if (b.dims == a.dims) {
      for (std::size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] = apply(a.data[i], b.data[i]);
      }
      return out;
    }
    if (b.size() == 1) {
      for (float& v : out.data) v = apply(v, b.data[0]);
      return out;
    }
    const std::int64_t last = a.dims.empty() ? 0 : a.dims.back();
    if (static_cast<std::int64_t>(b.size()) == last) {
      const std::size_t rows = a.size() / static_cast<std::size_t>(last);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::int64_t j = 0; j < last; ++j) {
          const std::size_t idx = r * static_cast<std::size_t>(last) + j;
          out.data[idx] = apply(a.data[idx], b.data[static_cast<std::size_t>(j)]);
        }
      }
      return out;
    }
    throw BackendError(who + ": operand shapes do not broadcast");
  }

  template <typename Fn>
  Value eval_unary(const GraphNode& node, const std::map<std::string, Value>& env, Fn fn) const {
    Value out = operand(node, 0, env);
    for (float& v : out.data) v = fn(v);
    return out;
  }

  Value eval_flatten(const GraphNode& node, const std::map<std::string, Value>& env,
                     const std::string& who) const {
    const Value& x = operand(node, 0, env);
    const auto rank = static_cast<std::int64_t>(x.dims.size());
    std::int64_t axis = node.attr_i("axis", 1);
    if (axis < 0) axis += rank;
    if (axis < 0 || axis > rank) {
      throw BackendError(who + ": axis " + std::to_string(node.attr_i("axis", 1)) +
                         " out of range for rank " + std::to_string(rank));
    }
    std::int64_t head = 1, tail = 1;
    for (std::int64_t i = 0; i < rank; ++i) (i < axis ? head : tail) *= x.dims[i];
    Value out = x;
    out.dims = {head, tail};
    return out;
  }

  Value eval_reshape(const GraphNode& node, const std::map<std::string, Value>& env,
                     const std::string& who) const {
    const Value& x = operand(node, 0, env);
    if (node.inputs.size() < 2) throw BackendError(who + ": missing shape operand");
    const auto it = initializer_index_.find(node.inputs[1]);
    if (it == initializer_index_.end() ||
        graph_.initializers[it->second].data_type != 7) {
      throw BackendError(who + ": shape operand must be an int64 initializer");
    }
    std::vector<std::int64_t> target = graph_.initializers[it->second].int_values;
    std::int64_t known = 1;
    int inferred = -1;
    for (std::size_t i = 0; i < target.size(); ++i) {
      if (target[i] == 0) {
        if (i >= x.dims.size()) throw BackendError(who + ": 0-dim has no source axis");
        target[i] = x.dims[i];
      }
      if (target[i] == -1) {
        if (inferred >= 0) throw BackendError(who + ": more than one inferred dimension");
        inferred = static_cast<int>(i);
      } else {
        known *= target[i];
      }
    }
    const auto total = static_cast<std::int64_t>(x.size());
    if (inferred >= 0) {
      if (known == 0 || total % known != 0) {
        throw BackendError(who + ": cannot infer dimension for " + std::to_string(total) +
                           " elements");
      }
      target[static_cast<std::size_t>(inferred)] = total / known;
      known = total;
    }
    if (known != total) {
      throw BackendError(who + ": target shape holds " + std::to_string(known) +
                         " elements, tensor has " + std::to_string(total));
    }
    Value out = x;
    out.dims = std::move(target);
    return out;
  }

  GraphDef graph_;
  std::map<std::string, std::size_t> initializer_index_;
};

}  // namespace idveil::onnx
