#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace fourthdown {

enum class Era { y1999_2005, y2006_2013, y2014_2017, y2018_plus };
enum class Roof { closed, dome, open, outdoors };
enum class PlayType { go, field_goal, punt, kickoff, other };

Era era_for_season(int season);
std::string_view to_string(Era era);
std::string_view to_string(Roof roof);
std::string_view to_string(PlayType type);

struct PlayRecord {
  std::string game_id;
  std::string drive_id;
  int play_index = 0;
  int season = 0;
  int win_loss = 0;
  int game_seconds_remaining = 3600;
  int score_differential = 0;
  int total_score = 0;
  double posteam_spread = 0.0;
  double total_points_line = 0.0;
  int yardline = 75;
  int ydstogo = 10;
  int down = 1;
  int posteam_timeouts = 3;
  int defteam_timeouts = 3;
  int receive_2h_ko = 0;
  int home = 0;
  Roof roof = Roof::outdoors;
  std::string posteam_coach;
  std::optional<std::string> kicker_id;
  std::optional<std::string> punter_id;
  PlayType play_type = PlayType::other;
  std::optional<int> yards_gained;
  std::optional<int> fg_made;
  std::optional<int> next_yardline_after_punt;

  Era era() const { return era_for_season(season); }
  bool operator==(const PlayRecord&) const = default;
};

/// Canonical field names, in the column order of the canonical CSV dump.
const std::vector<std::string>& canonical_fields();

/// canonical field -> CSV header. Unlisted fields map to themselves.
class ColumnMap {
 public:
  ColumnMap() = default;
  /// Reads `canonical = header` lines; `#` starts a comment.
  static ColumnMap from_stream(std::istream& in);
  static ColumnMap from_file(const std::string& path);

  void set(const std::string& canonical, const std::string& header);
  std::string header_for(const std::string& canonical) const;

 private:
  std::map<std::string, std::string> map_;
};

struct RejectedRow {
  std::size_t row_number = 0;  // 1-based data row (header excluded)
  std::string reason;
};

struct IngestResult {
  std::vector<PlayRecord> plays;
  std::vector<RejectedRow> rejects;
  std::size_t rows_read = 0;
};

/// Parses an RFC 4180 CSV of plays. Missing required columns throw
/// SchemaError; bad rows are diverted to `rejects`.
IngestResult parse_plays(std::istream& csv, const ColumnMap& schema = {});

/// Canonical CSV (header + one line per play); re-parses to identical records.
void write_plays(std::ostream& out, std::span<const PlayRecord> plays);
void write_reject_log(std::ostream& out, std::span<const RejectedRow> rejects);

std::vector<PlayRecord> filter_seasons(std::span<const PlayRecord> plays, int season_min,
                                       int season_max);

struct SplitFractions {
  double train = 0.5;
  double tune = 0.25;
  double test = 0.25;
};

struct DatasetSplit {
  std::vector<std::string> train_game_ids;
  std::vector<std::string> tune_game_ids;
  std::vector<std::string> test_game_ids;
  std::uint64_t seed = 0;

  enum class Part { train, tune, test, none };
  Part part_of(const std::string& game_id) const;
};

/// Random partition of games (never plays). Deterministic for a fixed seed.
DatasetSplit make_split(std::span<const PlayRecord> plays, const SplitFractions& fractions,
                        std::uint64_t seed);

/// Indices of plays whose game belongs to `part`; test exposes first downs only.
std::vector<std::size_t> split_rows(std::span<const PlayRecord> plays, const DatasetSplit& split,
                                    DatasetSplit::Part part);

struct TrainingPools {
  std::vector<std::size_t> punt;
  std::vector<std::size_t> field_goal;
  std::vector<std::size_t> conversion;
  std::vector<std::size_t> first_down;
  std::vector<std::size_t> fourth_down;

  /// Names of empty pools, for the ingest summary.
  std::vector<std::string> empty_pools() const;
};

/// Pools index into `plays`. Terminal rows (yardline 0 or 100) never enter a pool.
TrainingPools filter_training_pools(std::span<const PlayRecord> plays);

/// Game -> drive -> play indices, in first-appearance order.
struct ClusterIndex {
  struct Game {
    std::string game_id;
    std::vector<std::vector<std::size_t>> drives;
  };
  std::vector<Game> games;
};

ClusterIndex build_cluster_index(std::span<const PlayRecord> plays);

}  // namespace fourthdown
