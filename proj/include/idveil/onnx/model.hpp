#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "idveil/core/errors.hpp"

// Reader for the protobuf wire encoding of serialized feed-forward models.
// Only the messages and fields the inference adapter needs are decoded;
// everything else is skipped by wire type. No generated code, no schema
// compiler, just the five wire primitives.

namespace idveil::onnx {

// Constant tensor stored inside a model file. Weights and biases carry
// float32 payloads; shape operands for Reshape carry int64 payloads.
struct TensorData {
  std::string name;
  std::vector<std::int64_t> dims;
  int data_type = 0;  // 1 = float32, 7 = int64
  std::vector<float> values;
  std::vector<std::int64_t> int_values;

  std::size_t element_count() const {
    std::size_t n = 1;
    for (std::int64_t d : dims) n *= static_cast<std::size_t>(d);
    return n;
  }
};

struct NodeAttribute {
  std::string name;
  float f = 0.0f;
  std::int64_t i = 0;
  std::vector<float> floats;
  std::vector<std::int64_t> ints;
};

struct GraphNode {
  std::string name;
  std::string op_type;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::vector<NodeAttribute> attributes;

  float attr_f(std::string_view attr, float fallback) const {
    for (const auto& a : attributes) {
      if (a.name == attr) return a.f;
    }
    return fallback;
  }
  std::int64_t attr_i(std::string_view attr, std::int64_t fallback) const {
    for (const auto& a : attributes) {
      if (a.name == attr) return a.i;
    }
    return fallback;
  }
};

struct GraphDef {
  std::string name;
  std::vector<GraphNode> nodes;
  std::vector<TensorData> initializers;
  std::vector<std::string> inputs;   // declared graph inputs, initializers included
  std::vector<std::string> outputs;
};

namespace detail {

// Wire types of the protobuf encoding.
inline constexpr int kWireVarint = 0;
inline constexpr int kWireFixed64 = 1;
inline constexpr int kWireLenDelim = 2;
inline constexpr int kWireFixed32 = 5;

// Sequential cursor over one message body. Every primitive read checks the
// remaining length and fails loudly, so a truncated or corrupted file cannot
// be silently misread as a shorter valid one.
class WireCursor {
 public:
  WireCursor(std::string_view bytes, std::string context)
      : bytes_(bytes), context_(std::move(context)) {}

  bool done() const { return pos_ >= bytes_.size(); }

  std::uint64_t read_varint() {
    std::uint64_t value = 0;
    for (int shift = 0; shift < 64; shift += 7) {
      if (pos_ >= bytes_.size()) fail("truncated varint");
      const auto byte = static_cast<std::uint8_t>(bytes_[pos_++]);
      value |= static_cast<std::uint64_t>(byte & 0x7f) << shift;
      if ((byte & 0x80) == 0) return value;
    }
    fail("varint longer than 10 bytes");
  }

  // Returns {field number, wire type}.
  std::pair<int, int> read_tag() {
    const std::uint64_t tag = read_varint();
    const int field = static_cast<int>(tag >> 3);
    const int wire = static_cast<int>(tag & 0x7);
    if (field == 0) fail("field number 0");
    return {field, wire};
  }

  std::uint32_t read_fixed32() {
    if (bytes_.size() - pos_ < 4) fail("truncated 32-bit value");
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) {
      v = (v << 8) | static_cast<std::uint8_t>(bytes_[pos_ + i]);
    }
    pos_ += 4;
    return v;
  }

  std::uint64_t read_fixed64() {
    if (bytes_.size() - pos_ < 8) fail("truncated 64-bit value");
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
      v = (v << 8) | static_cast<std::uint8_t>(bytes_[pos_ + i]);
    }
    pos_ += 8;
    return v;
  }

  std::string_view read_bytes() {
    const std::uint64_t len = read_varint();
    if (len > bytes_.size() - pos_) fail("length-delimited field overruns buffer");
    std::string_view out = bytes_.substr(pos_, static_cast<std::size_t>(len));
    pos_ += static_cast<std::size_t>(len);
    return out;
  }

  void skip(int wire) {
    switch (wire) {
      case kWireVarint: read_varint(); return;
      case kWireFixed64: read_fixed64(); return;
      case kWireLenDelim: read_bytes(); return;
      case kWireFixed32: read_fixed32(); return;
      default: fail("unsupported wire type " + std::to_string(wire));
    }
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw IoError(context_ + ": " + what);
  }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
  std::string context_;
};

inline float float_from_bits(std::uint32_t bits) { return std::bit_cast<float>(bits); }

// Repeated int64 fields arrive either packed (one length-delimited blob of
// varints) or as individual varint entries; both are legal encodings.
inline void read_repeated_i64(WireCursor& c, int wire, std::vector<std::int64_t>& out) {
  if (wire == kWireLenDelim) {
    WireCursor packed(c.read_bytes(), "packed int64 list");
    while (!packed.done()) out.push_back(static_cast<std::int64_t>(packed.read_varint()));
  } else if (wire == kWireVarint) {
    out.push_back(static_cast<std::int64_t>(c.read_varint()));
  } else {
    c.fail("int64 list with wire type " + std::to_string(wire));
  }
}

inline void read_repeated_f32(WireCursor& c, int wire, std::vector<float>& out) {
  if (wire == kWireLenDelim) {
    const std::string_view blob = c.read_bytes();
    if (blob.size() % 4 != 0) c.fail("packed float list length not a multiple of 4");
    WireCursor packed(blob, "packed float list");
    for (std::size_t i = 0; i < blob.size() / 4; ++i) {
      out.push_back(float_from_bits(packed.read_fixed32()));
    }
  } else if (wire == kWireFixed32) {
    out.push_back(float_from_bits(c.read_fixed32()));
  } else {
    c.fail("float list with wire type " + std::to_string(wire));
  }
}

inline TensorData parse_tensor(std::string_view bytes) {
  TensorData t;
  std::string raw;
  WireCursor c(bytes, "tensor");
  while (!c.done()) {
    const auto [field, wire] = c.read_tag();
    switch (field) {
      case 1: read_repeated_i64(c, wire, t.dims); break;
      case 2: t.data_type = static_cast<int>(c.read_varint()); break;
      case 4: read_repeated_f32(c, wire, t.values); break;
      case 7: read_repeated_i64(c, wire, t.int_values); break;
      case 8: t.name = std::string(c.read_bytes()); break;
      case 9: raw = std::string(c.read_bytes()); break;
      default: c.skip(wire); break;
    }
  }
  for (std::int64_t d : t.dims) {
    if (d < 0) throw IoError("tensor '" + t.name + "': negative dimension");
  }
  if (t.data_type == 1) {
    if (!raw.empty()) {
      if (!t.values.empty()) throw IoError("tensor '" + t.name + "': both raw and typed data");
      if (raw.size() % 4 != 0) throw IoError("tensor '" + t.name + "': raw float payload truncated");
      WireCursor rc(raw, "tensor '" + t.name + "' raw data");
      for (std::size_t i = 0; i < raw.size() / 4; ++i) {
        t.values.push_back(float_from_bits(rc.read_fixed32()));
      }
    }
    if (t.values.size() != t.element_count()) {
      throw IoError("tensor '" + t.name + "': payload holds " + std::to_string(t.values.size()) +
                    " values but dims declare " + std::to_string(t.element_count()));
    }
  } else if (t.data_type == 7) {
    if (!raw.empty()) {
      if (!t.int_values.empty()) throw IoError("tensor '" + t.name + "': both raw and typed data");
      if (raw.size() % 8 != 0) throw IoError("tensor '" + t.name + "': raw int64 payload truncated");
      WireCursor rc(raw, "tensor '" + t.name + "' raw data");
      for (std::size_t i = 0; i < raw.size() / 8; ++i) {
        t.int_values.push_back(static_cast<std::int64_t>(rc.read_fixed64()));
      }
    }
    if (t.int_values.size() != t.element_count()) {
      throw IoError("tensor '" + t.name + "': payload holds " + std::to_string(t.int_values.size()) +
                    " values but dims declare " + std::to_string(t.element_count()));
    }
  } else {
    throw IoError("tensor '" + t.name + "': unsupported data type " + std::to_string(t.data_type) +
                  " (float32 and int64 only)");
  }
  return t;
}

inline NodeAttribute parse_attribute(std::string_view bytes) {
  NodeAttribute a;
  WireCursor c(bytes, "node attribute");
  while (!c.done()) {
    const auto [field, wire] = c.read_tag();
    switch (field) {
      case 1: a.name = std::string(c.read_bytes()); break;
      case 2: a.f = float_from_bits(c.read_fixed32()); break;
      case 3: a.i = static_cast<std::int64_t>(c.read_varint()); break;
      case 7: read_repeated_f32(c, wire, a.floats); break;
      case 8: read_repeated_i64(c, wire, a.ints); break;
      default: c.skip(wire); break;  // strings, nested tensors, type marker
    }
  }
  return a;
}

inline GraphNode parse_node(std::string_view bytes) {
  GraphNode n;
  WireCursor c(bytes, "graph node");
  while (!c.done()) {
    const auto [field, wire] = c.read_tag();
    switch (field) {
      case 1: n.inputs.emplace_back(c.read_bytes()); break;
      case 2: n.outputs.emplace_back(c.read_bytes()); break;
      case 3: n.name = std::string(c.read_bytes()); break;
      case 4: n.op_type = std::string(c.read_bytes()); break;
      case 5: n.attributes.push_back(parse_attribute(c.read_bytes())); break;
      default: c.skip(wire); break;
    }
  }
  if (n.op_type.empty()) throw IoError("graph node '" + n.name + "' has no operator type");
  return n;
}

// ValueInfo carries name plus type metadata; only the name matters here
// because tensor shapes are checked against fed values at run time.
inline std::string parse_value_info_name(std::string_view bytes) {
  std::string name;
  WireCursor c(bytes, "value info");
  while (!c.done()) {
    const auto [field, wire] = c.read_tag();
    if (field == 1) {
      name = std::string(c.read_bytes());
    } else {
      c.skip(wire);
    }
  }
  if (name.empty()) throw IoError("value info entry has no name");
  return name;
}

inline GraphDef parse_graph(std::string_view bytes) {
  GraphDef g;
  WireCursor c(bytes, "graph");
  while (!c.done()) {
    const auto [field, wire] = c.read_tag();
    switch (field) {
      case 1: g.nodes.push_back(parse_node(c.read_bytes())); break;
      case 2: g.name = std::string(c.read_bytes()); break;
      case 5: g.initializers.push_back(parse_tensor(c.read_bytes())); break;
      case 11: g.inputs.push_back(parse_value_info_name(c.read_bytes())); break;
      case 12: g.outputs.push_back(parse_value_info_name(c.read_bytes())); break;
      default: c.skip(wire); break;
    }
  }
  return g;
}

}  // namespace detail

// Parses a serialized model and returns its graph. The model wrapper fields
// (version stamps, producer strings, operator set imports) are skipped.
inline GraphDef parse_model(std::string_view bytes) {
  GraphDef graph;
  bool seen = false;
  detail::WireCursor c(bytes, "model");
  while (!c.done()) {
    const auto [field, wire] = c.read_tag();
    if (field == 7) {
      graph = detail::parse_graph(c.read_bytes());
      seen = true;
    } else {
      c.skip(wire);
    }
  }
  if (!seen) throw IoError("model has no graph");
  if (graph.outputs.empty()) throw IoError("model graph declares no outputs");
  return graph;
}

inline GraphDef load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(path.string() + ": cannot open");
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (!is.good() && !is.eof()) throw IoError(path.string() + ": read failed");
  try {
    return parse_model(bytes);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace idveil::onnx
