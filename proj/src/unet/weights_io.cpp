// Weight file layout:
//
//   spmseg-unet-weights 1
//   depth: 3
//   base_channels: 8
//   input_size: 128
//   padding: same
//   final_activation: sigmoid
//   dtype: float32-le
//   <metadata key>: <value>            (sorted by key)
//   tensor_count: <n>
//   tensor: <name> <n>x<c>x<h>x<w> offset=<bytes> bytes=<bytes>   (n lines)
//   payload_bytes: <total>
//   end_header
//   <payload>
//
// Offsets are relative to the first payload byte; tensors are contiguous in
// manifest order.

#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "spmseg/unet/model.hpp"

namespace spmseg::nn {

namespace {

constexpr const char* kMagic = "spmseg-unet-weights 1";
const std::set<std::string> kReserved = {"depth",        "base_channels", "input_size",
                                         "padding",      "final_activation", "dtype",
                                         "tensor_count", "tensor",        "payload_bytes"};

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

std::string shape_token(const Shape4& s) {
  return std::to_string(s.n) + "x" + std::to_string(s.c) + "x" + std::to_string(s.h) + "x" +
         std::to_string(s.w);
}

struct ManifestEntry {
  std::string name;
  Shape4 shape;
  std::size_t offset = 0;
  std::size_t bytes = 0;
};

struct Header {
  UNetSpec spec;
  std::map<std::string, std::string> metadata;
  std::vector<ManifestEntry> tensors;
  std::size_t payload_bytes = 0;
};

[[noreturn]] void bad(const std::filesystem::path& path, const std::string& what) {
  throw DataError("weight file " + path.string() + ": " + what);
}

int parse_int(const std::filesystem::path& path, const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const int x = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    bad(path, "bad integer for '" + key + "': '" + v + "'");
  }
}

Shape4 parse_shape(const std::filesystem::path& path, const std::string& tok) {
  Shape4 s;
  int* dims[4] = {&s.n, &s.c, &s.h, &s.w};
  std::stringstream ss(tok);
  std::string part;
  int i = 0;
  while (std::getline(ss, part, 'x')) {
    if (i >= 4) bad(path, "bad shape '" + tok + "'");
    *dims[i++] = parse_int(path, "shape", part);
  }
  if (i != 4) bad(path, "bad shape '" + tok + "'");
  return s;
}

Header read_header(std::istream& in, const std::filesystem::path& path) {
  std::string line;
  if (!std::getline(in, line) || line != kMagic) bad(path, "missing '" + std::string(kMagic) + "' magic line");
  Header h;
  bool have[3] = {false, false, false};
  int declared_count = -1;
  bool have_payload = false;
  for (;;) {
    if (!std::getline(in, line)) bad(path, "header ended without end_header");
    if (line == "end_header") break;
    const auto colon = line.find(": ");
    if (colon == std::string::npos) bad(path, "malformed header line '" + line + "'");
    const std::string key = line.substr(0, colon);
    const std::string value = line.substr(colon + 2);
    if (key == "depth") {
      h.spec.depth = parse_int(path, key, value);
      have[0] = true;
    } else if (key == "base_channels") {
      h.spec.base_channels = parse_int(path, key, value);
      have[1] = true;
    } else if (key == "input_size") {
      h.spec.input_size = parse_int(path, key, value);
      have[2] = true;
    } else if (key == "tensor_count") {
      declared_count = parse_int(path, key, value);
    } else if (key == "payload_bytes") {
      h.payload_bytes = static_cast<std::size_t>(std::stoull(value));
      have_payload = true;
    } else if (key == "tensor") {
      std::istringstream ts(value);
      ManifestEntry e;
      std::string shape, off, bytes;
      if (!(ts >> e.name >> shape >> off >> bytes) || !off.starts_with("offset=") ||
          !bytes.starts_with("bytes=")) {
        bad(path, "malformed tensor line '" + line + "'");
      }
      e.shape = parse_shape(path, shape);
      e.offset = static_cast<std::size_t>(std::stoull(off.substr(7)));
      e.bytes = static_cast<std::size_t>(std::stoull(bytes.substr(6)));
      h.tensors.push_back(std::move(e));
    } else if (key == "padding" || key == "final_activation" || key == "dtype") {
      const std::string expect = key == "padding" ? "same" : key == "dtype" ? "float32-le" : "sigmoid";
      if (value != expect) bad(path, "unsupported " + key + " '" + value + "'");
    } else {
      h.metadata[key] = value;
    }
  }
  if (!have[0] || !have[1] || !have[2]) bad(path, "header lacks depth/base_channels/input_size");
  if (!have_payload) bad(path, "header lacks payload_bytes");
  if (declared_count != static_cast<int>(h.tensors.size())) {
    bad(path, "tensor_count " + std::to_string(declared_count) + " but " +
                  std::to_string(h.tensors.size()) + " tensor lines");
  }
  return h;
}

void check_against(const Header& h, const UNetSpec& spec, const std::filesystem::path& path) {
  const auto layout = unet_layout(spec);
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& [name, shape] = layout[i];
    if (i >= h.tensors.size()) {
      throw ShapeError("weight file " + path.string() + ": tensor '" + name + "' " + shape.str() +
                       " missing from manifest");
    }
    const auto& e = h.tensors[i];
    if (e.name != name || !(e.shape == shape)) {
      throw ShapeError("weight file " + path.string() + ": shape mismatch at tensor '" + name +
                       "': expected " + shape.str() + ", file has '" + e.name + "' " + e.shape.str());
    }
  }
  if (h.tensors.size() != layout.size()) {
    throw ShapeError("weight file " + path.string() + ": unexpected extra tensor '" +
                     h.tensors[layout.size()].name + "'");
  }
}

ModelWeights read_payload(std::istream& in, const Header& h, const std::filesystem::path& path) {
  std::size_t expected_offset = 0;
  for (const auto& e : h.tensors) {
    if (e.offset != expected_offset || e.bytes != e.shape.count() * 4) {
      bad(path, "manifest entry '" + e.name + "' has inconsistent offset/size");
    }
    expected_offset += e.bytes;
  }
  if (expected_offset != h.payload_bytes) bad(path, "payload_bytes disagrees with manifest");

  std::vector<unsigned char> payload(h.payload_bytes);
  in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (static_cast<std::size_t>(in.gcount()) != payload.size()) {
    bad(path, "truncated payload: expected " + std::to_string(payload.size()) + " bytes, found " +
                  std::to_string(in.gcount()));
  }
  if (in.peek() != std::char_traits<char>::eof()) bad(path, "trailing bytes after payload");

  ModelWeights m;
  m.spec = h.spec;
  m.metadata = h.metadata;
  for (const auto& e : h.tensors) {
    Tensor4 value(e.shape);
    for (std::size_t i = 0; i < value.size(); ++i) {
      const unsigned char* b = payload.data() + e.offset + 4 * i;
      const std::uint32_t bits = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                                 (static_cast<std::uint32_t>(b[2]) << 16) |
                                 (static_cast<std::uint32_t>(b[3]) << 24);
      value[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
    m.params.push_back({e.name, std::move(value), Tensor4(e.shape)});
  }
  return m;
}

}  // namespace

void save_weights(const ModelWeights& model, const std::filesystem::path& path) {
  model.spec.validate();
  std::ostringstream header;
  header << kMagic << "\n";
  header << "depth: " << model.spec.depth << "\n";
  header << "base_channels: " << model.spec.base_channels << "\n";
  header << "input_size: " << model.spec.input_size << "\n";
  header << "padding: same\nfinal_activation: sigmoid\ndtype: float32-le\n";
  auto meta = model.metadata;
  if (!meta.count("optimizer")) meta["optimizer"] = "none (untrained)";
  for (const auto& [k, v] : meta) {
    if (kReserved.count(k) || k.empty() || k.find(':') != std::string::npos ||
        k.find_first_of(" \n") != std::string::npos) {
      throw ParameterError("metadata key '" + k + "' is not allowed in a weight file");
    }
    header << k << ": " << one_line(v) << "\n";
  }
  header << "tensor_count: " << model.params.size() << "\n";
  std::size_t offset = 0;
  for (const auto& p : model.params) {
    const std::size_t bytes = p.value.size() * 4;
    header << "tensor: " << p.name << " " << shape_token(p.value.shape()) << " offset=" << offset
           << " bytes=" << bytes << "\n";
    offset += bytes;
  }
  header << "payload_bytes: " << offset << "\nend_header\n";

  std::vector<unsigned char> payload;
  payload.reserve(offset);
  for (const auto& p : model.params) {
    for (double v : p.value.data()) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      for (int i = 0; i < 4; ++i) payload.push_back(static_cast<unsigned char>(bits >> (8 * i)));
    }
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  const std::string text = header.str();
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  out.close();
  if (!out) throw DataError("failed writing " + path.string());
}

ModelWeights load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  const Header h = read_header(in, path);
  try {
    h.spec.validate();
  } catch (const ParameterError& e) {
    bad(path, e.what());
  }
  check_against(h, h.spec, path);
  return read_payload(in, h, path);
}

ModelWeights load_weights(const std::filesystem::path& path, const UNetSpec& expected) {
  expected.validate();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  const Header h = read_header(in, path);
  check_against(h, expected, path);
  if (!(h.spec == expected)) {
    bad(path, "header spec (depth " + std::to_string(h.spec.depth) + ", input " +
                  std::to_string(h.spec.input_size) + ") differs from the expected architecture");
  }
  return read_payload(in, h, path);
}

}  // namespace spmseg::nn
