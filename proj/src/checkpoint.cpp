#include "vsop3d/io/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace vsop3d {

namespace {

constexpr char kMagic[8] = {'V', '3', 'D', 'C', 'K', 'P', 'T', '\0'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(const std::string& data) : data_(data) {}

  std::uint64_t u64() { return read(8); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(read(4)); }
  std::uint8_t u8() { return static_cast<std::uint8_t>(read(1)); }
  std::string raw(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == data_.size(); }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw CheckpointError("checkpoint is truncated");
  }
  std::uint64_t read(int bytes) {
    need(static_cast<std::size_t>(bytes));
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + static_cast<std::size_t>(i)])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(bytes);
    return v;
  }
  const std::string& data_;
  std::size_t pos_ = 0;
};

std::vector<std::int64_t> header_fields(const BackboneConfig& c) {
  return {c.frames,           c.conv_kind == ConvKind::kConv3d ? 1 : 0,
          c.width_multiplier, c.obs_height,
          c.obs_width,        c.obs_channels,
          c.num_actions,      c.base_channels[0],
          c.base_channels[1], c.base_channels[2],
          c.hidden_units};
}

}  // namespace

void Checkpoint::put(Entry entry) {
  if (has(entry.name)) throw CheckpointError("duplicate checkpoint entry '" + entry.name + "'");
  entries_.push_back(std::move(entry));
}

void Checkpoint::put_f64(const std::string& name, std::vector<double> values) {
  Entry e;
  e.name = name;
  e.kind = Kind::kF64;
  e.f64 = std::move(values);
  put(std::move(e));
}

void Checkpoint::put_i64(const std::string& name, std::vector<std::int64_t> values) {
  Entry e;
  e.name = name;
  e.kind = Kind::kI64;
  e.i64 = std::move(values);
  put(std::move(e));
}

void Checkpoint::put_bytes(const std::string& name, std::string bytes) {
  Entry e;
  e.name = name;
  e.kind = Kind::kBytes;
  e.bytes = std::move(bytes);
  put(std::move(e));
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return true;
  }
  return false;
}

const Checkpoint::Entry& Checkpoint::find(const std::string& name, Kind kind) const {
  for (const auto& e : entries_) {
    if (e.name != name) continue;
    if (e.kind != kind) throw CheckpointError("checkpoint entry '" + name + "' has a different type");
    return e;
  }
  throw CheckpointError("checkpoint has no entry '" + name + "'");
}

const std::vector<double>& Checkpoint::f64(const std::string& name) const { return find(name, Kind::kF64).f64; }
const std::vector<std::int64_t>& Checkpoint::i64(const std::string& name) const {
  return find(name, Kind::kI64).i64;
}
const std::string& Checkpoint::bytes(const std::string& name) const { return find(name, Kind::kBytes).bytes; }

std::string Checkpoint::encode() const {
  std::string out(kMagic, sizeof(kMagic));
  put_u32(out, kVersion);
  const auto header = header_fields(config);
  put_u32(out, static_cast<std::uint32_t>(header.size()));
  for (std::int64_t v : header) put_u64(out, static_cast<std::uint64_t>(v));
  put_u64(out, entries_.size());
  for (const auto& e : entries_) {
    out.push_back(static_cast<char>(e.kind));
    put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out += e.name;
    switch (e.kind) {
      case Kind::kF64:
        put_u64(out, e.f64.size());
        for (double v : e.f64) put_u64(out, std::bit_cast<std::uint64_t>(v));
        break;
      case Kind::kI64:
        put_u64(out, e.i64.size());
        for (std::int64_t v : e.i64) put_u64(out, static_cast<std::uint64_t>(v));
        break;
      case Kind::kBytes:
        put_u64(out, e.bytes.size());
        out += e.bytes;
        break;
    }
  }
  return out;
}

Checkpoint Checkpoint::decode(const std::string& data) {
  Reader in(data);
  if (in.raw(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) throw CheckpointError("not a checkpoint file");
  const std::uint32_t version = in.u32();
  if (version != kVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const std::uint32_t fields = in.u32();
  if (fields != 11) throw CheckpointError("unexpected checkpoint header size");
  std::vector<std::int64_t> h(fields);
  for (auto& v : h) v = static_cast<std::int64_t>(in.u64());
  Checkpoint ck;
  ck.config.frames = h[0];
  ck.config.conv_kind = h[1] == 1 ? ConvKind::kConv3d : ConvKind::kConv2d;
  ck.config.width_multiplier = h[2];
  ck.config.obs_height = h[3];
  ck.config.obs_width = h[4];
  ck.config.obs_channels = h[5];
  ck.config.num_actions = h[6];
  ck.config.base_channels = {h[7], h[8], h[9]};
  ck.config.hidden_units = h[10];
  const std::uint64_t count = in.u64();
  for (std::uint64_t k = 0; k < count; ++k) {
    Entry e;
    const auto kind = in.u8();
    if (kind < 1 || kind > 3) throw CheckpointError("unknown checkpoint entry type");
    e.kind = static_cast<Kind>(kind);
    e.name = in.raw(in.u32());
    const std::uint64_t n = in.u64();
    if (e.kind != Kind::kBytes && n > in.remaining() / 8) throw CheckpointError("checkpoint is truncated");
    switch (e.kind) {
      case Kind::kF64:
        e.f64.resize(n);
        for (auto& v : e.f64) v = std::bit_cast<double>(in.u64());
        break;
      case Kind::kI64:
        e.i64.resize(n);
        for (auto& v : e.i64) v = static_cast<std::int64_t>(in.u64());
        break;
      case Kind::kBytes:
        e.bytes = in.raw(n);
        break;
    }
    ck.put(std::move(e));
  }
  if (!in.at_end()) throw CheckpointError("trailing bytes after checkpoint entries");
  return ck;
}

void Checkpoint::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint '" + path + "'");
  const std::string data = encode();
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw CheckpointError("failed writing checkpoint '" + path + "'");
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read checkpoint '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode(buf.str());
}

}  // namespace vsop3d
