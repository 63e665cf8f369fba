#pragma once

// Binary parameter container ("TGMCCKP1") plus a JSON sidecar.
//
// Layout, all integers little-endian:
//   magic    8 bytes  "TGMCCKP1"
//   count    u32
//   table    count x { u32 name_len, name bytes, u32 rows, u32 cols }
//   payload  for each table entry in order: rows*cols f32, row-major

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "tgmc/errors.hpp"
#include "tgmc/tensor.hpp"

namespace tgmc {

inline constexpr std::string_view kCheckpointMagic = "TGMCCKP1";

namespace io {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int k = 0; k < 4; ++k) b[k] = static_cast<unsigned char>(v >> (8 * k));
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(v >> (8 * k));
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline void put_f32(std::ostream& os, float f) { put_u32(os, std::bit_cast<std::uint32_t>(f)); }

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw ValidationError("unexpected end of binary stream");
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(b[k]) << (8 * k);
  return v;
}

inline std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw ValidationError("unexpected end of binary stream");
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(b[k]) << (8 * k);
  return v;
}

inline float get_f32(std::istream& is) { return std::bit_cast<float>(get_u32(is)); }

inline void expect_magic(std::istream& is, std::string_view magic, const std::string& what) {
  std::string got(magic.size(), '\0');
  if (!is.read(got.data(), static_cast<std::streamsize>(got.size())) || got != magic)
    throw ValidationError(what + ": bad magic");
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw MissingArtifactError("cannot read " + path.string());
  return nlohmann::json::parse(is);
}

}  // namespace io

class Checkpoint {
 public:
  struct Entry {
    std::string name;
    Matrix value;
  };

  template <typename T>
  void put(const std::string& name, const Tensor2<T>& value) {
    for (auto& e : entries_) {
      if (e.name == name) {
        e.value = value.template cast<float>();
        return;
      }
    }
    entries_.push_back({name, value.template cast<float>()});
  }

  bool contains(const std::string& name) const {
    for (const auto& e : entries_)
      if (e.name == name) return true;
    return false;
  }

  /// Reads `name` into `out`, which must already have the stored shape.
  template <typename T>
  void get(const std::string& name, Tensor2<T>& out) const {
    for (const auto& e : entries_) {
      if (e.name != name) continue;
      if (e.value.rows() != out.rows() || e.value.cols() != out.cols())
        throw ShapeError("checkpoint entry " + name + " is " + e.value.shape_string() +
                         ", expected " + out.shape_string());
      out = e.value.template cast<T>();
      return;
    }
    throw MissingArtifactError("checkpoint has no entry " + name);
  }

  const Matrix& at(const std::string& name) const {
    for (const auto& e : entries_)
      if (e.name == name) return e.value;
    throw MissingArtifactError("checkpoint has no entry " + name);
  }

  const std::vector<Entry>& entries() const { return entries_; }

  void write(std::ostream& os) const {
    os.write(kCheckpointMagic.data(), static_cast<std::streamsize>(kCheckpointMagic.size()));
    io::put_u32(os, static_cast<std::uint32_t>(entries_.size()));
    for (const auto& e : entries_) {
      io::put_u32(os, static_cast<std::uint32_t>(e.name.size()));
      os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
      io::put_u32(os, static_cast<std::uint32_t>(e.value.rows()));
      io::put_u32(os, static_cast<std::uint32_t>(e.value.cols()));
    }
    for (const auto& e : entries_)
      for (float v : e.value.flat()) io::put_f32(os, v);
  }

  static Checkpoint read(std::istream& is) {
    io::expect_magic(is, kCheckpointMagic, "checkpoint");
    const auto count = io::get_u32(is);
    Checkpoint ckpt;
    for (std::uint32_t k = 0; k < count; ++k) {
      const auto len = io::get_u32(is);
      std::string name(len, '\0');
      if (!is.read(name.data(), len)) throw ValidationError("checkpoint: truncated table");
      const auto rows = io::get_u32(is);
      const auto cols = io::get_u32(is);
      ckpt.entries_.push_back({std::move(name), Matrix(rows, cols)});
    }
    for (auto& e : ckpt.entries_)
      for (auto& v : e.value.flat()) v = io::get_f32(is);
    return ckpt;
  }

  /// Writes `path` and a `path.json` sidecar listing shapes plus `metadata`.
  void save(const std::filesystem::path& path, const nlohmann::json& metadata = {}) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot write " + path.string());
    write(os);
    nlohmann::json side;
    side["format"] = std::string(kCheckpointMagic);
    auto& shapes = side["tensors"];
    shapes = nlohmann::json::array();
    for (const auto& e : entries_) shapes.push_back({{"name", e.name}, {"rows", e.value.rows()}, {"cols", e.value.cols()}});
    side["metadata"] = metadata.is_null() ? nlohmann::json::object() : metadata;
    io::write_json(path.string() + ".json", side);
  }

  static Checkpoint load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw MissingArtifactError("missing checkpoint " + path.string());
    return read(is);
  }

  static nlohmann::json load_metadata(const std::filesystem::path& path) {
    return io::read_json(path.string() + ".json").at("metadata");
  }

 private:
  std::vector<Entry> entries_;
};

}  // namespace tgmc
