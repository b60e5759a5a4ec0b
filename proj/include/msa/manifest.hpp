// Line-oriented manifests tying the pipeline together:
//   dataset:  <relative path> <speaker label> <split>
//   noise:    <relative path> <category> <split>
//   mixing:   <clean path> <noise path> <category> <snr_db> <seed>
// Fields are whitespace separated; paths must not contain spaces.

#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace msa {

struct UtteranceRecord {
  std::string path;
  std::string speaker;
  std::string split;  // "train" | "test"
};

struct NoiseRecord {
  std::string path;
  std::string category;  // "noise" | "music" | "babble"
  std::string split;     // "train" | "test"
};

struct MixRecord {
  std::string clean_path;
  std::string noise_path;
  std::string category;
  int snr_db = 0;
  std::uint64_t seed = 0;
};

namespace manifest_detail {

inline std::vector<std::vector<std::string>> read_rows(const std::string& path,
                                                       std::size_t fields) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("manifest: cannot open " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    std::vector<std::string> row;
    std::string tok;
    while (is >> tok) row.push_back(tok);
    if (row.size() != fields)
      throw std::runtime_error("manifest: " + path + ":" + std::to_string(lineno) +
                               ": expected " + std::to_string(fields) + " fields");
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace manifest_detail

inline std::vector<UtteranceRecord> load_dataset_manifest(const std::string& path) {
  std::vector<UtteranceRecord> out;
  for (auto& r : manifest_detail::read_rows(path, 3))
    out.push_back({r[0], r[1], r[2]});
  return out;
}

inline void save_dataset_manifest(const std::string& path,
                                  const std::vector<UtteranceRecord>& recs) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("manifest: cannot write " + path);
  for (const auto& r : recs) f << r.path << ' ' << r.speaker << ' ' << r.split << '\n';
}

inline std::vector<NoiseRecord> load_noise_manifest(const std::string& path) {
  std::vector<NoiseRecord> out;
  for (auto& r : manifest_detail::read_rows(path, 3))
    out.push_back({r[0], r[1], r[2]});
  return out;
}

inline void save_noise_manifest(const std::string& path,
                                const std::vector<NoiseRecord>& recs) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("manifest: cannot write " + path);
  for (const auto& r : recs) f << r.path << ' ' << r.category << ' ' << r.split << '\n';
}

inline std::vector<MixRecord> load_mix_manifest(const std::string& path) {
  std::vector<MixRecord> out;
  for (auto& r : manifest_detail::read_rows(path, 5))
    out.push_back({r[0], r[1], r[2], std::stoi(r[3]),
                   std::uint64_t(std::stoull(r[4]))});
  return out;
}

inline void save_mix_manifest(const std::string& path,
                              const std::vector<MixRecord>& recs) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("manifest: cannot write " + path);
  for (const auto& r : recs)
    f << r.clean_path << ' ' << r.noise_path << ' ' << r.category << ' '
      << r.snr_db << ' ' << r.seed << '\n';
}

// Stable speaker label -> class index mapping (sorted label order).
inline std::map<std::string, std::size_t> speaker_index(
    const std::vector<UtteranceRecord>& recs) {
  std::vector<std::string> labels;
  for (const auto& r : recs) labels.push_back(r.speaker);
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  std::map<std::string, std::size_t> idx;
  for (std::size_t i = 0; i < labels.size(); ++i) idx[labels[i]] = i;
  return idx;
}

}  // namespace msa
