/*
 * Copyright (c) 2026 The plexfed Authors
 *
 * Licensed under the Apache License, Version 2.0;
 * You may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an 'AS IS' BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "plexfed/bundle.hpp"
#include "plexfed/phantom.hpp"
#include "plexfed/rng.hpp"
#include "plexfed/volume.hpp"

namespace plexfed::testing {

inline GridInfo grid(int nx, int ny, int nz, Spacing s = {}) {
  GridInfo g;
  g.dims = {nx, ny, nz};
  g.spacing = s;
  g.dataset_id = "T";
  g.subject_id = "t";
  return g;
}

inline Mask random_mask(const GridInfo& g, Rng& rng, double p = 0.5) {
  Mask m(g);
  for (auto& l : m.labels) l = rng.bernoulli(p) ? 1 : 0;
  return m;
}

inline Volume random_volume(const GridInfo& g, Rng& rng) {
  Volume v(g);
  for (auto& x : v.voxels) x = static_cast<float>(rng.uniform());
  return v;
}

// Phantom whose image is exactly its mask: plexus 1.0 on background 0.0.
inline LabeledVolume separable_subject(std::uint64_t seed, const std::string& dataset = "S") {
  DomainSpec spec;
  spec.domain_id = dataset;
  spec.dims = {16, 16, 16};
  LabeledVolume lv = generate_phantom(spec, seed);
  for (std::size_t i = 0; i < lv.image.voxels.size(); ++i) lv.image.voxels[i] = lv.mask.labels[i] ? 1.0f : 0.0f;
  return lv;
}

inline std::vector<LabeledVolume> separable_set(std::size_t n, std::uint64_t base, const std::string& dataset = "S") {
  std::vector<LabeledVolume> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(separable_subject(base + i, dataset));
    out.back().image.info.subject_id = out.back().mask.info.subject_id = dataset + "_" + std::to_string(i);
  }
  return out;
}

inline ModelBundle random_bundle(std::uint64_t seed) {
  ModelBundle b;
  Rng rng(seed);
  auto pool = default_config_pool();
  for (std::size_t s = 0; s < kSlotCount; ++s) {
    b.slots[s] = init_params(pool[s], rng.next());
    for (auto& w : b.slots[s].weights) w = rng.uniform(-3.0, 3.0);
  }
  b.version = "rand-" + std::to_string(seed);
  b.parent_hash = "";
  TrainingEvent e;
  e.kind = TrainingKind::kInitial;
  e.datasets = {"D0"};
  e.iterations = rng.below(1000);
  e.seed = seed;
  for (auto& d : e.slot_val_dice) d = rng.uniform();
  e.note = "random";
  b.provenance.push_back(e);
  return b;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("plexfed_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace plexfed::testing
