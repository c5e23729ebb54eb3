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

// Acceptance suite: one PASS/FAIL line per criterion. The end-to-end checks run the
// default five-domain experiment inside --workdir (wiped first).

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "plexfed/bundle.hpp"
#include "plexfed/error.hpp"
#include "plexfed/experiment.hpp"
#include "plexfed/federation.hpp"
#include "plexfed/harness.hpp"
#include "plexfed/merge.hpp"
#include "plexfed/metrics.hpp"
#include "plexfed/optimizer.hpp"
#include "plexfed/pipeline.hpp"
#include "plexfed/registry.hpp"
#include "plexfed/vol_io.hpp"
#include "support.hpp"

namespace {

using namespace plexfed;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

// Tolerances and runtime limits.
constexpr double kGradRelTol = 1e-4;
constexpr double kGradFloor = 1e-8;
constexpr double kFdStep = 1e-5;
constexpr double kAdamWTol = 1e-10;
constexpr double kMergeTol = 1e-12;
constexpr double kOlsTol = 1e-10;
constexpr double kForgetDrop = 0.05;
constexpr double kRetainBand = 0.05;
constexpr double kDiceSeconds = 5.0;
constexpr double kVoteSeconds = 1.0;
constexpr double kGradSeconds = 30.0;
constexpr double kIntegritySeconds = 10.0;
constexpr double kExperimentSeconds = 600.0;

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && failure_.empty()) failure_ = what;
    pass_ = pass_ && ok;
  }
  void note(const std::string& s) { notes_ += (notes_.empty() ? "" : "; ") + s; }
  Outcome done() const { return {pass_, pass_ ? notes_ : failure_ + (notes_.empty() ? "" : " | " + notes_)}; }

 private:
  bool pass_ = true;
  std::string failure_;
  std::string notes_;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome dice_oracle() {
  Check c;
  const auto t0 = Clock::now();
  Rng rng(101);
  const auto g = testing::grid(8, 8, 8);
  for (int t = 0; t < 1000; ++t) {
    const auto a = testing::random_mask(g, rng, rng.uniform(0.05, 0.6));
    const auto b = testing::random_mask(g, rng, rng.uniform(0.05, 0.6));
    std::size_t inter = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.labels.size(); ++i) {
      inter += a.labels[i] & b.labels[i];
      na += a.labels[i];
      nb += b.labels[i];
    }
    const double brute = (na + nb) == 0 ? 1.0 : 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
    c.expect(dice(a, b) == brute, "dice differs from voxel counting at trial " + std::to_string(t));
    if (a.foreground() > 0) c.expect(dice(a, a) == 1.0, "dice(m, m) != 1");
    Mask comp = a;
    for (auto& l : comp.labels) l ^= 1u;
    if (a.foreground() > 0 && comp.foreground() > 0) c.expect(dice(a, comp) == 0.0, "disjoint dice != 0");
  }
  const double s = seconds_since(t0);
  c.expect(s < kDiceSeconds, "runtime " + fmt("%.2f", s) + " s over limit");
  c.note("1000 pairs, " + fmt("%.2f", s) + " s");
  return c.done();
}

Outcome vote_exhaustive() {
  Check c;
  const auto t0 = Clock::now();
  const auto lv = testing::separable_subject(5);
  const auto pool = default_config_pool();
  for (unsigned pattern = 0; pattern < 32; ++pattern) {
    // Zero feature weights and a saturating bias fix each slot's vote everywhere.
    ModelBundle b;
    std::vector<Mask> votes;
    for (std::size_t s = 0; s < kSlotCount; ++s) {
      b.slots[s] = init_params(pool[s], s);
      std::fill(b.slots[s].weights.begin(), b.slots[s].weights.end(), 0.0);
      b.slots[s].weights.back() = (pattern >> s) & 1u ? 10.0 : -10.0;
      votes.push_back(binarize(predict_probs(b.slots[s], lv.image), lv.image.info));
    }
    const std::uint8_t expected = std::popcount(pattern) >= 3 ? 1 : 0;
    const auto out = ensemble_predict(b, lv.image);
    const auto mv = majority_vote(votes);
    for (std::size_t i = 0; i < out.labels.size(); ++i) {
      int count = 0;
      for (const auto& v : votes) count += v.labels[i];
      if ((count >= 3 ? 1 : 0) != expected || out.labels[i] != expected || mv.labels[i] != expected) {
        c.expect(false, "vote mismatch for pattern " + std::to_string(pattern));
        break;
      }
    }
  }
  // Mixed votes within one volume: bit s of the voxel index decides slot s.
  std::vector<Mask> votes;
  for (std::size_t s = 0; s < kSlotCount; ++s) {
    Mask m(testing::grid(32, 1, 1));
    for (unsigned p = 0; p < 32; ++p) m.labels[p] = (p >> s) & 1u;
    votes.push_back(m);
  }
  const auto mixed = majority_vote(votes);
  for (unsigned p = 0; p < 32; ++p)
    c.expect(mixed.labels[p] == (std::popcount(p) >= 3 ? 1 : 0), "per-voxel vote mismatch at " + std::to_string(p));
  const double s = seconds_since(t0);
  c.expect(s < kVoteSeconds, "runtime " + fmt("%.3f", s) + " s over limit");
  c.note("32 patterns, " + fmt("%.3f", s) + " s");
  return c.done();
}

Outcome gradient_check() {
  Check c;
  const auto t0 = Clock::now();
  Rng rng(2024);
  const auto g = testing::grid(4, 4, 4);
  double worst = 0.0;
  const auto pool = default_config_pool();
  for (int trial = 0; trial < 100; ++trial) {
    const auto v = testing::random_volume(g, rng);
    const auto gt = testing::random_mask(g, rng, rng.uniform(0.1, 0.5));
    SegmenterParams p = init_params(pool[static_cast<std::size_t>(trial) % kSlotCount], rng.next());
    for (auto& w : p.weights) w = rng.uniform(-1.0, 1.0);
    const auto fm = extract_features(v, p.config);
    const auto grad = grad_loss(p, fm, gt);
    for (std::size_t j = 0; j < p.weights.size(); ++j) {
      SegmenterParams plus = p, minus = p;
      plus.weights[j] += kFdStep;
      minus.weights[j] -= kFdStep;
      const double fd = (loss(predict_probs(plus, fm), gt) - loss(predict_probs(minus, fm), gt)) / (2 * kFdStep);
      const double err = std::abs(grad[j] - fd) / std::max({std::abs(grad[j]), std::abs(fd), kGradFloor});
      worst = std::max(worst, err);
    }
  }
  const double s = seconds_since(t0);
  c.expect(worst < kGradRelTol, "max relative error " + fmt("%.2e", worst));
  c.expect(s < kGradSeconds, "runtime " + fmt("%.2f", s) + " s over limit");
  c.note("max rel err " + fmt("%.2e", worst) + ", " + fmt("%.2f", s) + " s");
  return c.done();
}

Outcome adamw_reference() {
  Check c;
  AdamWState st(1);
  std::vector<double> w = {1.0};
  const std::vector<double> g = {0.5};
  adamw_step(st, w, g);
  // Bias-corrected moments give m_hat = 0.5, v_hat = 0.25.
  const double hand = 1.0 - 1e-4 * (0.5 / (std::sqrt(0.25) + 1e-8)) - 1e-4 * 1e-5 * 1.0;
  c.expect(std::abs(w[0] - hand) < kAdamWTol, "first step " + fmt("%.12f", w[0]));
  c.expect(std::abs(w[0] - 0.9998999990) < kAdamWTol, "first step differs from 0.9998999990");

  AdamWConfig no_decay;
  no_decay.weight_decay = 0.0;
  AdamWState st2(4, no_decay);
  std::vector<double> w2 = {0.3, -1.7, 2.5e-3, 12.0};
  const auto before = w2;
  const std::vector<double> zero(4, 0.0);
  adamw_step(st2, w2, zero);
  c.expect(std::memcmp(w2.data(), before.data(), sizeof(double) * w2.size()) == 0, "zero step moved weights");
  c.note("w' = " + fmt("%.10f", w[0]));
  return c.done();
}

std::vector<std::vector<double>> weights_of(const ModelBundle& b) {
  std::vector<std::vector<double>> w;
  for (const auto& s : b.slots) w.push_back(s.weights);
  return w;
}

Outcome merge_algebra() {
  Check c;
  Rng rng(55);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const auto g = testing::random_bundle(rng.next());
    const auto i = testing::random_bundle(rng.next());
    c.expect(weights_of(merge(g, i, {1.0, 0.02})) == weights_of(g), "alpha = 1 is not the global model");
    c.expect(weights_of(merge(g, i, {0.0, 0.02})) == weights_of(i), "alpha = 0 is not the incoming model");
    const double alpha = rng.uniform();
    const auto m = merge(g, i, {alpha, 0.02});
    for (std::size_t s = 0; s < kSlotCount; ++s)
      for (std::size_t k = 0; k < m.slots[s].weights.size(); ++k)
        worst = std::max(worst, std::abs(m.slots[s].weights[k] -
                                         (alpha * g.slots[s].weights[k] + (1 - alpha) * i.slots[s].weights[k])));
  }
  c.expect(worst <= kMergeTol, "linearity error " + fmt("%.2e", worst));
  auto g = testing::random_bundle(1);
  auto bad = testing::random_bundle(2);
  bad.slots[1].config.radius += 1;
  bool structural = false;
  try {
    merge(g, bad, {});
  } catch (const Error& e) {
    structural = e.code() == ErrorCode::kStructural;
  }
  c.expect(structural, "config mismatch was not rejected as structural");
  c.note("max linearity error " + fmt("%.1e", worst));
  return c.done();
}

Outcome stats_oracles() {
  Check c;
  auto oracle_q = [](std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    const double h = static_cast<double>(v.size() - 1) * p;
    const auto f = static_cast<std::size_t>(std::floor(h));
    if (f + 1 >= v.size()) return v[f];
    return v[f] + (h - static_cast<double>(f)) * (v[f + 1] - v[f]);
  };
  Rng rng(808);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> v(1 + rng.below(60));
    for (auto& x : v) x = rng.uniform();
    const auto r = median_iqr(v);
    c.expect(r.median == oracle_q(v, 0.5), "median mismatch at list " + std::to_string(t));
    c.expect(r.iqr == oracle_q(v, 0.75) - oracle_q(v, 0.25), "iqr mismatch at list " + std::to_string(t));
  }
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 3 + rng.below(50);
    std::vector<double> x(n), y(n);
    const double a = rng.uniform(-50, 50), b = rng.uniform(0.2, 2.0);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = rng.uniform(10, 500);
      y[i] = a + b * x[i] + rng.normal() * 10.0;
    }
    double sx = 0, sxx = 0, sy = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
      sx += x[i];
      sxx += x[i] * x[i];
      sy += y[i];
      sxy += x[i] * y[i];
    }
    const double nn = static_cast<double>(n);
    const double det = nn * sxx - sx * sx;
    const double c0 = (sy * sxx - sx * sxy) / det;
    const double c1 = (nn * sxy - sx * sy) / det;
    const auto fit = ols_fit(y, x);
    worst = std::max({worst, std::abs(fit.slope - c1) / std::max(1.0, std::abs(c1)),
                      std::abs(fit.intercept - c0) / std::max(1.0, std::abs(c0))});
  }
  c.expect(worst < kOlsTol, "ols relative error " + fmt("%.2e", worst));
  c.note("1000 lists exact, ols max rel err " + fmt("%.1e", worst));
  return c.done();
}

Outcome gating_rules(const fs::path& workdir) {
  Check c;
  // Local incremental learning refuses nine volumes.
  const auto nine = testing::separable_set(9, 900, "L");
  const auto base = testing::random_bundle(3);
  bool local_refused = false;
  try {
    IncrementalOptions opts;
    opts.regime.max_iters = 10;
    local_incremental_learn(base, nine, opts);
  } catch (const Error& e) {
    local_refused = e.code() == ErrorCode::kInsufficientVolumes;
  }
  c.expect(local_refused, "local IL accepted 9 volumes");

  // The server re-checks the count on arrival.
  ServerConfig sc;
  sc.port = 0;
  sc.api_keys = {"k"};
  sc.registry_dir = workdir / "gating_registry";
  fs::remove_all(sc.registry_dir);
  FederationServer server(sc, testing::separable_set(5, 950, "R"), Registry(sc.registry_dir));
  server.bootstrap(std::string(kRegion), base);
  UpdateEnvelope env;
  env.client_id = "nine";
  env.api_key = "k";
  env.base_version = 1;
  env.volume_count = 9;
  env.payload = serialize(base);
  env.payload_checksum_hex = to_hex(sha256(env.payload));
  const auto out = server.submit_update(env);
  c.expect(out.status == SubmitStatus::kRejectedVolumes, "server accepted a 9-volume envelope");
  c.expect(server.head(std::string(kRegion)).version == 1, "head moved after a 9-volume envelope");

  // General column size for cohorts of (21, 9, 30, 30, 30).
  std::map<std::string, std::vector<SubjectScore>> per;
  Rng rng(49);
  const std::size_t sizes[] = {21, 9, 30, 30, 30};
  for (std::size_t d = 0; d < 5; ++d)
    for (std::size_t i = 0; i < sizes[d]; ++i)
      per["D" + std::to_string(d)].push_back({"s" + std::to_string(i), rng.uniform()});
  std::size_t total = 0;
  for (const auto& [d, ids] : general_sample(per, 10)) total += ids.size();
  c.expect(total == 49, "general total " + std::to_string(total));
  c.note("general total " + std::to_string(total));
  return c.done();
}

Outcome wire_integrity(const fs::path& registry_dir, const fs::path& workdir) {
  Check c;
  const auto t0 = Clock::now();
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto b = testing::random_bundle(1000 + s);
    const auto bytes = serialize(b);
    const auto back = deserialize(bytes);
    c.expect(back == b && serialize(back) == bytes, "bundle round trip differs for seed " + std::to_string(s));
  }
  const auto reg = Registry::load(registry_dir);
  const auto head = reg.head(std::string(kRegion));
  const fs::path copy = workdir / "registry_copy";
  fs::remove_all(copy);
  reg.persist(copy);
  const auto reloaded = Registry::load(copy).head(std::string(kRegion));
  c.expect(reloaded.checksum == head.checksum && reloaded.record_hash == head.record_hash,
           "persist/load changed the head");

  // Flip one byte inside the first record's payload.
  fs::path log;
  for (const auto& e : fs::directory_iterator(copy))
    if (e.path().extension() == ".log") log = e.path();
  auto bytes = read_file(log);
  const auto& first = reg.chain(std::string(kRegion)).front().payload;
  const auto at = std::search(bytes.begin(), bytes.end(), first.begin(), first.end());
  c.expect(at != bytes.end(), "first payload not found in the log");
  if (at != bytes.end()) {
    *(at + static_cast<long>(first.size() / 3)) ^= 0x01;
    write_file(log, bytes);
    bool detected = false;
    try {
      Registry::load(copy);
    } catch (const RegistryLoadError& e) {
      detected = e.bad_version() == 1;
    }
    c.expect(detected, "single-byte tamper not detected at version 1");
  }
  const double s = seconds_since(t0);
  c.expect(s < kIntegritySeconds, "runtime " + fmt("%.2f", s) + " s over limit");
  c.note("head v" + std::to_string(head.version) + " reloaded, tamper caught, " + fmt("%.2f", s) + " s");
  return c.done();
}

// Large random weights: the half-weight merge cannot dilute them back to the global model.
ModelBundle adversarial_update(const ModelBundle& like, std::uint64_t seed) {
  ModelBundle b = like;
  Rng rng(seed);
  for (auto& slot : b.slots)
    for (auto& w : slot.weights) w = rng.uniform(-300.0, 300.0);
  return b;
}

Outcome gate_monotonicity(const ExperimentConfig& cfg, const IlArmResult& il) {
  Check c;
  const double eps = cfg.merge.epsilon_gate;
  std::size_t accepted = 0;
  for (const auto& r : il.rounds) {
    if (r.outcome.accepted()) {
      ++accepted;
      c.expect(r.head_version == r.base_version + 1, "accepted round did not advance the head by one");
      c.expect(r.outcome.candidate_dice && r.outcome.current_dice &&
                   *r.outcome.candidate_dice >= *r.outcome.current_dice - eps,
               "accepted round regressed beyond the gate");
    } else {
      c.expect(r.head_version == r.base_version, "rejected round moved the head");
    }
  }
  const auto reg = Registry::load(cfg.registry_dir());
  const auto& chain = reg.chain(std::string(kRegion));
  for (std::size_t i = 1; i < chain.size(); ++i)
    c.expect(chain[i].reference_dice >= chain[i - 1].reference_dice - eps,
             "registry version " + std::to_string(chain[i].version) + " regressed");

  // Inject the adversarial update against a server reopened on the same registry.
  auto server = make_server(cfg, 0);
  const ModelVersion before = server->head(std::string(kRegion));
  UpdateEnvelope env;
  env.client_id = "adversary";
  env.api_key = cfg.federation.client_api_key;
  env.base_version = before.version;
  env.volume_count = 10;
  env.payload = serialize(adversarial_update(before.bundle, 666));
  env.payload_checksum_hex = to_hex(sha256(env.payload));
  const auto out = server->submit_update(env);
  c.expect(out.status == SubmitStatus::kRejectedValidation, "adversarial update was not rejected by the gate");
  const ModelVersion after = server->head(std::string(kRegion));
  c.expect(after == before, "head changed after the rejected update");
  const auto reloaded = Registry::load(cfg.registry_dir()).head(std::string(kRegion));
  c.expect(reloaded.record_hash == before.record_hash && reloaded.payload == before.payload,
           "persisted head changed after the rejected update");
  for (const auto& e : server->gate_log())
    if (e.status != SubmitStatus::kAccepted) c.expect(e.head_after == e.head_before, "rejected entry moved head");
  c.note(std::to_string(accepted) + "/" + std::to_string(il.rounds.size()) + " rounds accepted, adversary dice " +
         (out.candidate_dice ? fmt("%.3f", *out.candidate_dice) : std::string("n/a")) + " vs " +
         (out.current_dice ? fmt("%.3f", *out.current_dice) : std::string("n/a")));
  return c.done();
}

double cell(const std::vector<AggregateCell>& cells, const std::string& model, const std::string& dataset) {
  for (const auto& c : cells)
    if (c.model_id == model && c.dataset_id == dataset) return c.median_dice;
  fail(ErrorCode::kNotFound, "missing cell " + model + "/" + dataset);
}

Outcome forgetting_pattern(const ExperimentConfig& cfg, const ReportOutputs& rep, double runtime) {
  Check c;
  const std::string m0(kModel0);
  const std::string d0 = cfg.domains[0].spec.domain_id;
  const std::size_t k_max = cfg.domains.size() - 1;
  std::ostringstream detail;
  detail.setf(std::ios::fixed);
  detail.precision(3);

  detail << "(a)";
  for (std::size_t k = 1; k <= k_max; ++k) {
    const std::string dk = cfg.domains[k].spec.domain_id;
    const double ft = cell(rep.ft_table, ft_model_id(k), dk), base = cell(rep.ft_table, m0, dk);
    c.expect(ft > base, "(a) " + ft_model_id(k) + " does not beat Model0 on " + dk);
    detail << ' ' << ft_model_id(k) << '=' << ft << '>' << base;
  }

  const double base_d0 = cell(rep.ft_table, m0, d0);
  std::size_t forgot = 0;
  detail << " (b)";
  for (std::size_t k = 1; k <= k_max; ++k) {
    const double v = cell(rep.ft_table, ft_model_id(k), d0);
    if (base_d0 - v >= kForgetDrop) ++forgot;
    detail << ' ' << v;
  }
  c.expect(forgot >= 3, "(b) only " + std::to_string(forgot) + " FT models forget " + d0);
  detail << " forgot " << forgot << "/" << k_max;

  detail << " (c)";
  for (std::size_t k = 1; k <= k_max; ++k) {
    const double v = cell(rep.il_table, il_model_id(k), d0);
    c.expect(std::abs(v - base_d0) <= kRetainBand, "(c) " + il_model_id(k) + " drifts on " + d0);
    detail << ' ' << v;
  }

  const double il_general = cell(rep.il_table, il_model_id(k_max), "General");
  const double ft_general = cell(rep.ft_table, std::string(kFtAll), "General");
  c.expect(il_general >= ft_general, "(d) IL General below FTall General");
  detail << " (d) " << il_general << ">=" << ft_general;

  c.expect(runtime < kExperimentSeconds, "end-to-end runtime " + fmt("%.0f", runtime) + " s over target");
  detail << ", " << fmt("%.0f", runtime) << " s";
  c.note(detail.str());
  return c.done();
}

struct Line {
  int id;
  std::string name;
  Outcome outcome;
};

Outcome guarded(const std::function<Outcome()>& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    return {false, std::string("exception: ") + e.what()};
  }
}

}  // namespace

int main(int argc, char** argv) {
  fs::path workdir = fs::temp_directory_path() / "plexfed_acceptance";
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--workdir" && i + 1 < argc) {
      workdir = argv[++i];
    } else {
      std::cerr << "usage: plexfed_acceptance [--workdir DIR]\n";
      return 2;
    }
  }
  fs::remove_all(workdir);
  fs::create_directories(workdir);

  std::vector<Line> lines;
  auto run = [&](int id, const std::string& name, const std::function<Outcome()>& f) {
    lines.push_back({id, name, guarded(f)});
    const auto& l = lines.back();
    std::cout << "criterion " << l.id << ' ' << (l.outcome.pass ? "PASS" : "FAIL") << ' ' << l.name << ": "
              << l.outcome.detail << std::endl;
  };

  run(1, "dice oracle", dice_oracle);
  run(2, "majority vote", vote_exhaustive);
  run(3, "gradient", gradient_check);
  run(4, "adamw step", adamw_reference);
  run(5, "merge algebra", merge_algebra);

  // Criteria 6, 7 and 9 share one run of the default experiment.
  ExperimentConfig cfg = default_experiment_config();
  cfg.output_dir = workdir / "experiment";
  std::optional<IlArmResult> il;
  std::optional<ReportOutputs> rep;
  double runtime = 0.0;
  std::string setup_error;
  try {
    const auto t0 = Clock::now();
    cmd_gen_data(cfg, false);
    cmd_run_ft_arm(cfg);
    il = cmd_run_il_arm(cfg);
    rep = cmd_report(cfg);
    runtime = seconds_since(t0);
  } catch (const std::exception& e) {
    setup_error = std::string("experiment failed: ") + e.what();
  }
  auto needs_run = [&](const std::function<Outcome()>& f) {
    return [&, f] { return setup_error.empty() ? f() : Outcome{false, setup_error}; };
  };

  run(6, "gate monotonicity", needs_run([&] { return gate_monotonicity(cfg, *il); }));
  run(7, "wire and persistence integrity", needs_run([&] { return wire_integrity(cfg.registry_dir(), workdir); }));
  run(8, "median/iqr and ols oracles", stats_oracles);
  run(9, "forgetting vs retention", needs_run([&] { return forgetting_pattern(cfg, *rep, runtime); }));
  run(10, "gating rules", [&] { return gating_rules(workdir); });

  const auto passed = std::count_if(lines.begin(), lines.end(), [](const Line& l) { return l.outcome.pass; });
  std::cout << passed << "/" << lines.size() << " criteria passed" << std::endl;
  return passed == static_cast<long>(lines.size()) ? 0 : 1;
}
