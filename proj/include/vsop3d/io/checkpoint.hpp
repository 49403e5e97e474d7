#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "vsop3d/nn/backbone.hpp"

namespace vsop3d {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flat binary container: magic, version, a BackboneConfig header, then named
// typed arrays in insertion order. All integers are little-endian and fp64
// values are stored by bit pattern, so encode(decode(b)) == b.
class Checkpoint {
 public:
  enum class Kind : std::uint8_t { kF64 = 1, kI64 = 2, kBytes = 3 };

  struct Entry {
    std::string name;
    Kind kind = Kind::kF64;
    std::vector<double> f64;
    std::vector<std::int64_t> i64;
    std::string bytes;
  };

  static constexpr std::uint32_t kVersion = 1;

  BackboneConfig config;

  void put_f64(const std::string& name, std::vector<double> values);
  void put_i64(const std::string& name, std::vector<std::int64_t> values);
  void put_bytes(const std::string& name, std::string bytes);

  bool has(const std::string& name) const;
  const std::vector<double>& f64(const std::string& name) const;
  const std::vector<std::int64_t>& i64(const std::string& name) const;
  const std::string& bytes(const std::string& name) const;
  const std::vector<Entry>& entries() const { return entries_; }

  std::string encode() const;
  static Checkpoint decode(const std::string& data);
  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

 private:
  const Entry& find(const std::string& name, Kind kind) const;
  void put(Entry entry);
  std::vector<Entry> entries_;
};

}  // namespace vsop3d
