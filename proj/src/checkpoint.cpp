#include "adapterlab/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "adapterlab/error.hpp"
#include "blob.hpp"

namespace adapterlab {
namespace detail {

namespace {

void put_le(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

double get_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

[[noreturn]] void bad(const std::string& where, const std::string& field, const std::string& why) {
  throw CheckpointError(where + ": field '" + field + "': " + why);
}

}  // namespace

ordered_json write_blob(const std::filesystem::path& file, std::span<const NamedTensor> tensors) {
  std::string bytes;
  ordered_json entries = ordered_json::object();
  for (const auto& [name, t] : tensors) {
    if (entries.contains(name)) throw CheckpointError("duplicate tensor name '" + name + "'");
    entries[name] = {{"shape", t.shape()}, {"dtype", "f64"}, {"offset", bytes.size()}};
    for (double v : t.data()) put_le(bytes, v);
  }
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write " + file.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("short write to " + file.string());
  return entries;
}

std::vector<NamedTensor> read_blob(const std::filesystem::path& file, const ordered_json& entries,
                                   const std::string& where) {
  if (!entries.is_object()) bad(where, "tensors", "expected an object");
  std::ifstream in(file, std::ios::binary);
  if (!in) throw CheckpointError("cannot read " + file.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::vector<NamedTensor> out;
  std::size_t expected_offset = 0;
  for (const auto& [name, entry] : entries.items()) {
    const std::string field = "tensors." + name;
    if (!entry.is_object()) bad(where, field, "expected an object");
    if (!entry.contains("dtype") || entry["dtype"] != "f64") bad(where, field + ".dtype", "must be \"f64\"");
    if (!entry.contains("shape") || !entry["shape"].is_array()) bad(where, field + ".shape", "missing or not an array");
    if (!entry.contains("offset") || !entry["offset"].is_number_unsigned()) {
      bad(where, field + ".offset", "missing or not a non-negative integer");
    }
    Shape shape;
    for (const auto& d : entry["shape"]) {
      if (!d.is_number_unsigned() || d.get<std::size_t>() == 0) bad(where, field + ".shape", "dimensions must be positive integers");
      shape.push_back(d.get<std::size_t>());
    }
    const auto offset = entry["offset"].get<std::size_t>();
    if (offset != expected_offset) {
      bad(where, field + ".offset", "expected " + std::to_string(expected_offset) + ", found " + std::to_string(offset));
    }
    const std::size_t n = shape_numel(shape);
    if (offset + n * 8 > bytes.size()) {
      bad(where, field + ".shape", shape_str(shape) + " runs past the end of " + file.filename().string());
    }
    std::vector<double> data(n);
    const auto* base = reinterpret_cast<const unsigned char*>(bytes.data()) + offset;
    for (std::size_t i = 0; i < n; ++i) data[i] = get_le(base + 8 * i);
    out.push_back({name, Tensor::from_data(std::move(shape), std::move(data))});
    expected_offset = offset + n * 8;
  }
  if (expected_offset != bytes.size()) {
    throw CheckpointError(where + ": " + file.filename().string() + " holds " + std::to_string(bytes.size()) +
                          " bytes but the manifest describes " + std::to_string(expected_offset));
  }
  return out;
}

ordered_json read_json_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw CheckpointError("cannot read " + file.string());
  try {
    return ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(file.string() + ": malformed JSON: " + e.what());
  }
}

void write_json_file(const std::filesystem::path& file, const ordered_json& value) {
  write_text_file(file, value.dump(2) + "\n");
}

void write_text_file(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write " + file.string());
  out << text;
  if (!out) throw CheckpointError("short write to " + file.string());
}

std::string read_text_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot read " + file.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace detail

void save_tensor_dir(const std::filesystem::path& dir, std::span<const NamedTensor> tensors) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw CheckpointError("cannot create " + dir.string() + ": " + ec.message());
  detail::ordered_json manifest;
  manifest["dtype"] = "f64";
  manifest["tensors"] = detail::write_blob(dir / "weights.bin", tensors);
  detail::write_json_file(dir / "manifest.json", manifest);
}

std::vector<NamedTensor> load_tensor_dir(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  const auto manifest = detail::read_json_file(manifest_path);
  if (!manifest.is_object() || !manifest.contains("tensors")) {
    throw CheckpointError(manifest_path.string() + ": field 'tensors': missing");
  }
  return detail::read_blob(dir / "weights.bin", manifest["tensors"], manifest_path.string());
}

}  // namespace adapterlab
