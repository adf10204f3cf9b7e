#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "pvni/record_store.hpp"

namespace pvni::testing {

inline std::filesystem::path fixtures() { return PVNI_FIXTURES_DIR; }

inline nlohmann::json read_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << s;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("pvni_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

struct Dataset {
  std::vector<ActivationRecord> acts;
  std::vector<JudgeRecord> judges;
};

/// Small in-memory dataset: per trait a random pos/neg pair and neu = neg + w (pos - neg) + noise.
inline Dataset synthetic_dataset(std::size_t d, unsigned seed, double neutral_weight,
                                 double noise = 0.0, long long variant_id = 0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Dataset ds;
  for (Trait t : kAllTraits) {
    std::vector<double> base(d), dir(d);
    for (auto& x : base) x = normal(rng);
    for (auto& x : dir) x = normal(rng);
    for (int p = 0; p < 3; ++p) {
      const std::string pid = "p" + std::to_string(p);
      for (Condition c : {Condition::Pos, Condition::Neg, Condition::Neu}) {
        ActivationRecord r;
        r.trait = t;
        r.condition = c;
        r.variant_id = variant_id;
        r.prompt_id = pid;
        r.layer = 3;
        const double w = c == Condition::Pos ? 1.0 : c == Condition::Neg ? 0.0 : neutral_weight;
        r.vector.resize(d);
        for (std::size_t k = 0; k < d; ++k) r.vector[k] = base[k] + w * dir[k] + noise * normal(rng);
        ds.acts.push_back(std::move(r));
      }
      for (Condition c : {Condition::Pos, Condition::Neg}) {
        for (int roll = 0; roll < 2; ++roll) {
          JudgeRecord j;
          j.trait = t;
          j.condition = c;
          j.variant_id = variant_id;
          j.prompt_id = pid;
          j.rollout_id = roll;
          j.payload = DirectScore{c == Condition::Pos ? 60.0 + 30.0 * uni(rng) : 5.0 + 30.0 * uni(rng)};
          ds.judges.push_back(std::move(j));
        }
      }
    }
  }
  return ds;
}

}  // namespace pvni::testing
