// Parameter container: a JSON manifest (entry names, shapes, byte offsets,
// config hash) followed by raw little-endian float32 arrays.  Round-trips are
// bit-exact for float tensors.  Entry names are slash-scoped; a "section" is
// simply a shared name prefix such as "se/" or "sid/".

#pragma once

#include <cstring>
#include <fstream>
#include <map>

#include <json.hpp>

#include "msa/digest.hpp"
#include "msa/tensor.hpp"

namespace msa {

inline constexpr char kCheckpointMagic[8] = {'M', 'S', 'A', 'C',
                                             'K', 'P', 'T', '1'};

struct Checkpoint {
  struct Entry {
    Shape shape;
    std::vector<float> values;
  };
  std::string config_hash;                     // hex64 of the experiment config
  std::string variant;                         // model variant that produced it
  std::vector<std::pair<std::string, Entry>> entries;  // insertion order

  const Entry& at(const std::string& name) const {
    for (const auto& [n, e] : entries)
      if (n == name) return e;
    throw std::out_of_range("checkpoint: no entry named '" + name + "'");
  }

  bool contains(const std::string& name) const {
    for (const auto& [n, e] : entries)
      if (n == name) return true;
    return false;
  }

  template <typename T>
  void add(const std::string& name, const Tensor<T>& t) {
    if (contains(name))
      throw std::invalid_argument("checkpoint: duplicate entry '" + name + "'");
    Entry e;
    e.shape = t.shape();
    e.values.assign(t.data().begin(), t.data().end());
    entries.emplace_back(name, std::move(e));
  }

  template <typename T>
  void restore(const std::string& name, Tensor<T>& t) const {
    const Entry& e = at(name);
    if (e.shape != t.shape())
      throw std::invalid_argument("checkpoint: entry '" + name + "' has shape " +
                                  shape_str(e.shape) + ", expected " +
                                  shape_str(t.shape()));
    std::copy(e.values.begin(), e.values.end(), t.data().begin());
  }

  // Collect every tensor reachable through params.visit under `prefix`.
  template <typename P>
  void add_params(const std::string& prefix, P& params) {
    params.visit(prefix, [this](const std::string& name, auto& t) {
      this->add(name, t);
    });
  }

  template <typename P>
  void restore_params(const std::string& prefix, P& params) const {
    params.visit(prefix, [this](const std::string& name, auto& t) {
      this->restore(name, t);
    });
  }

  // Stable digest over names, shapes and float32 payload bytes.
  std::string digest() const {
    std::uint64_t h = kFnvOffset;
    for (const auto& [name, e] : entries) {
      h = fnv1a64(name, h);
      for (std::size_t d : e.shape) {
        std::uint64_t v = d;
        h = fnv1a64(&v, sizeof(v), h);
      }
      h = fnv1a64(e.values.data(), e.values.size() * sizeof(float), h);
    }
    return hex64(h);
  }
};

// Digest of a live parameter set, independent of any file.
template <typename P>
std::string params_digest(const std::string& prefix, P& params) {
  Checkpoint ck;
  ck.add_params(prefix, params);
  return ck.digest();
}

namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = (v >> (8 * i)) & 0xff;
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw std::runtime_error("checkpoint: truncated header");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
  return v;
}

inline void put_f32_le(std::ostream& os, const std::vector<float>& v) {
  static_assert(sizeof(float) == 4);
  for (float x : v) {
    std::uint32_t u;
    std::memcpy(&u, &x, 4);
    unsigned char b[4] = {static_cast<unsigned char>(u & 0xff),
                          static_cast<unsigned char>((u >> 8) & 0xff),
                          static_cast<unsigned char>((u >> 16) & 0xff),
                          static_cast<unsigned char>((u >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
  }
}

inline void get_f32_le(std::istream& is, std::vector<float>& v,
                       std::size_t count) {
  v.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("checkpoint: truncated payload");
    std::uint32_t u = std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
                      (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
    std::memcpy(&v[i], &u, 4);
  }
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  nlohmann::json manifest;
  manifest["config_hash"] = ck.config_hash;
  manifest["variant"] = ck.variant;
  manifest["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, e] : ck.entries) {
    manifest["tensors"].push_back({{"name", name},
                                   {"shape", e.shape},
                                   {"offset", offset},
                                   {"count", e.values.size()}});
    offset += e.values.size() * 4;
  }
  const std::string mtext = manifest.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path);
  os.write(kCheckpointMagic, 8);
  detail::put_u64(os, mtext.size());
  os.write(mtext.data(), std::streamsize(mtext.size()));
  for (const auto& [name, e] : ck.entries) detail::put_f32_le(os, e.values);
  os.flush();
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  const std::uint64_t mlen = detail::get_u64(is);
  std::string mtext(mlen, '\0');
  is.read(mtext.data(), std::streamsize(mlen));
  if (!is) throw std::runtime_error("checkpoint: truncated manifest in " + path);

  nlohmann::json manifest = nlohmann::json::parse(mtext);
  Checkpoint ck;
  ck.config_hash = manifest.value("config_hash", std::string());
  ck.variant = manifest.value("variant", std::string());
  std::uint64_t expect_offset = 0;
  for (const auto& t : manifest.at("tensors")) {
    const std::string name = t.at("name");
    if (ck.contains(name))
      throw std::runtime_error("checkpoint: duplicate entry '" + name + "'");
    Checkpoint::Entry e;
    e.shape = t.at("shape").get<Shape>();
    const std::uint64_t count = t.at("count");
    if (count != shape_numel(e.shape))
      throw std::runtime_error("checkpoint: count/shape mismatch for '" + name +
                               "'");
    if (t.at("offset").get<std::uint64_t>() != expect_offset)
      throw std::runtime_error("checkpoint: non-contiguous offset for '" + name +
                               "'");
    expect_offset += count * 4;
    detail::get_f32_le(is, e.values, count);
    ck.entries.emplace_back(name, std::move(e));
  }
  is.peek();
  if (!is.eof()) throw std::runtime_error("checkpoint: trailing bytes in " + path);
  return ck;
}

}  // namespace msa
