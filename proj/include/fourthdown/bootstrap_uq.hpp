#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "fourthdown/decision_engine.hpp"

namespace fourthdown {

struct ResamplePlan {
  int B = 101;
  double fraction = 1.0;  // f; 1 is the plain cluster bootstrap, 0 returns the original data
  std::uint64_t seed = 0;
};

/// Sub-seed of replicate `index`; attempt > 0 gives the fresh seeds used after a failed fit.
std::uint64_t replicate_seed(std::uint64_t seed, std::size_t index, int attempt = 0);

/// Per-play weights of one cluster-bootstrap draw. Games are drawn with
/// replacement, then drives within each drawn copy of a game. With multiplicity
/// m_g for the game and mean drive multiplicity d per copy, a play gets
/// [f m_g + (1 - f)] [f d + (1 - f)].
std::vector<double> resample_weights(const ClusterIndex& clusters, std::size_t n_plays, double fraction,
                                     std::uint64_t seed);
std::vector<double> resample(std::span<const PlayRecord> plays, const ResamplePlan& plan, std::size_t replicate_index);

struct BootstrapEnsemble {
  DecisionModel point;
  std::vector<DecisionModel> replicates;
  ResamplePlan plan;
  std::vector<std::uint64_t> replicate_seeds;  // seed that produced each replicate
  std::string data_fingerprint;
};

struct EnsembleOptions {
  int max_retries = 3;
  bool parallel = true;
  std::function<void(std::size_t done, std::size_t total)> progress;
};

/// Point fit on unit weights plus plan.B replicate fits, all with `config`'s fixed
/// hyperparameters. Quality tables are shared. A replicate that fails is re-drawn
/// with a fresh sub-seed up to max_retries times; after that FitError propagates.
BootstrapEnsemble fit_ensemble(std::span<const PlayRecord> plays, const TrainingPools& pools,
                               const QualityTables& quality, const ResamplePlan& plan, const DecisionConfig& config,
                               const EnsembleOptions& options = {});

enum class ConfidenceBin { confident, lean, uncertain };
std::string_view to_string(ConfidenceBin b);
/// confident for [83, 100], lean for [67, 83), uncertain below 67.
ConfidenceBin confidence_bin(double boot_pct);

/// Nearest-rank order statistics, 1-based: ceil(a/2 B) and ceil((1 - a/2) B) for level 1 - a.
std::pair<std::size_t, std::size_t> ci_ranks(std::size_t B, double level);

struct UncertaintyReport {
  Decision decision = Decision::go;
  std::optional<double> point_gain;  // effect size of the point decision
  double boot_pct = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double level = 0.9;
  ConfidenceBin bin = ConfidenceBin::uncertain;
  std::vector<Decision> replicate_decisions;
  std::vector<double> gains;  // each replicate's signed gain of `decision`, in replicate order
};

/// boot% and CI from the point decision and per-replicate values; exposed for hand-count tests.
UncertaintyReport summarize(const DecisionValues& point, std::span<const DecisionValues> replicates,
                            double level = 0.9);
UncertaintyReport uncertainty(const BootstrapEnsemble& e, const FourthDownState& s, double level = 0.9);
/// One report per state; the parallel path splits states across threads.
std::vector<UncertaintyReport> uncertainty_batch(const BootstrapEnsemble& e, std::span<const FourthDownState> states,
                                                 double level = 0.9, bool parallel = true);

void to_json(nlohmann::json& j, const UncertaintyReport& r);

// ---------------------------------------------------------------------------
// Summaries

struct OverconfidenceBin {
  std::string label;  // effect size range in WP percentage points
  std::size_t count = 0;
  double confident = 0.0;  // shares in percent
  double lean = 0.0;
  double uncertain = 0.0;
};

struct OverconfidenceSummary {
  std::vector<OverconfidenceBin> bins;  // [0,1) [1,2) [2,3) [3,4) [4,inf)
  OverconfidenceBin overall;
  std::size_t skipped = 0;  // states with no alternative to Go
};

OverconfidenceSummary overconfidence_summary(std::span<const UncertaintyReport> reports);
void write_overconfidence(std::ostream& out, const OverconfidenceSummary& s);

struct StabilityRow {
  int B = 0;
  double p_bar = 0.0;
  std::vector<double> p;  // per state modal-category frequency over the M ensembles
};

struct StabilityOptions {
  std::vector<int> Bs = {11, 51};
  int M = 20;
  std::uint64_t seed = 0;
  double fraction = 1.0;
  bool parallel = true;
};

/// For each B, M independent ensembles (seeds derived from options.seed) classify every
/// state; p_i is the largest share of a single confidence bin. Ensemble m at size B is the
/// first B replicates of ensemble m at the largest size, which is itself a valid B-ensemble.
std::vector<StabilityRow> stability_analysis(std::span<const PlayRecord> plays, const TrainingPools& pools,
                                             const QualityTables& quality, std::span<const FourthDownState> states,
                                             const DecisionConfig& config, const StabilityOptions& options);

/// CSV `B,p_bar`.
void write_stability(std::ostream& out, std::span<const StabilityRow> rows);
/// CSV `B,bin_lo,bin_hi,count` over `bins` equal-width bins on [0, 1] (last bin closed).
void write_stability_histogram(std::ostream& out, std::span<const StabilityRow> rows, int bins = 20);

// ---------------------------------------------------------------------------
// Ensemble directory: point.model, rep_000.model, ..., manifest.json

void save_ensemble(const std::string& dir, const BootstrapEnsemble& e);
BootstrapEnsemble load_ensemble(const std::string& dir);

}  // namespace fourthdown
