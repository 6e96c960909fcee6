#include "fourthdown/data_ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_map>

#include "fourthdown/common.hpp"
#include "fourthdown/csv.hpp"

namespace fourthdown {

Era era_for_season(int season) {
  if (season <= 2005) return Era::y1999_2005;
  if (season <= 2013) return Era::y2006_2013;
  if (season <= 2017) return Era::y2014_2017;
  return Era::y2018_plus;
}

std::string_view to_string(Era era) {
  switch (era) {
    case Era::y1999_2005: return "1999-2005";
    case Era::y2006_2013: return "2006-2013";
    case Era::y2014_2017: return "2014-2017";
    case Era::y2018_plus: return "2018-2022";
  }
  return "";
}

std::string_view to_string(Roof roof) {
  switch (roof) {
    case Roof::closed: return "closed";
    case Roof::dome: return "dome";
    case Roof::open: return "open";
    case Roof::outdoors: return "outdoors";
  }
  return "";
}

std::string_view to_string(PlayType type) {
  switch (type) {
    case PlayType::go: return "go";
    case PlayType::field_goal: return "field_goal";
    case PlayType::punt: return "punt";
    case PlayType::kickoff: return "kickoff";
    case PlayType::other: return "other";
  }
  return "";
}

namespace {

enum Field : int {
  kGameId,
  kDriveId,
  kPlayIndex,
  kSeason,
  kWinLoss,
  kSeconds,
  kScoreDiff,
  kTotalScore,
  kSpread,
  kTotalLine,
  kYardline,
  kYdstogo,
  kDown,
  kPosTimeouts,
  kDefTimeouts,
  kReceive2h,
  kHome,
  kRoof,
  kCoach,
  kKicker,
  kPunter,
  kPlayType,
  kYardsGained,
  kFgMade,
  kNextYardline,
  kFieldCount
};

constexpr int kFirstOptional = kKicker;

bool is_optional_field(int f) {
  return f == kKicker || f == kPunter || f == kYardsGained || f == kFgMade || f == kNextYardline;
}

bool is_missing(std::string_view s) { return s.empty() || s == "NA" || s == "na" || s == "NaN"; }

std::optional<long long> parse_integer(std::string_view s) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec == std::errc() && ptr == s.data() + s.size()) return v;
  // Exports frequently write integers as "36.0".
  double d = 0;
  auto [p2, ec2] = std::from_chars(s.data(), s.data() + s.size(), d);
  if (ec2 == std::errc() && p2 == s.data() + s.size() && std::isfinite(d) && d == std::floor(d))
    return static_cast<long long>(d);
  return std::nullopt;
}

std::optional<double> parse_real(std::string_view s) {
  double d = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), d);
  if (ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(d)) return d;
  return std::nullopt;
}

std::optional<Roof> parse_roof(std::string_view s) {
  if (s == "closed") return Roof::closed;
  if (s == "dome") return Roof::dome;
  if (s == "open") return Roof::open;
  if (s == "outdoors") return Roof::outdoors;
  return std::nullopt;
}

std::optional<PlayType> parse_play_type(std::string_view s) {
  if (s == "go" || s == "run" || s == "pass") return PlayType::go;
  if (s == "field_goal") return PlayType::field_goal;
  if (s == "punt") return PlayType::punt;
  if (s == "kickoff") return PlayType::kickoff;
  if (s == "other" || s == "no_play" || s == "qb_kneel" || s == "qb_spike" || s == "extra_point")
    return PlayType::other;
  return std::nullopt;
}

// Returns the reason a row violates the PlayRecord invariants, or empty.
std::string check_invariants(const PlayRecord& p) {
  if (p.win_loss != 0 && p.win_loss != 1) return "win_loss not binary";
  if (p.game_seconds_remaining < 1 || p.game_seconds_remaining > 3600)
    return "game_seconds_remaining outside [1,3600]";
  if (p.total_score < 0) return "total_score negative";
  if (p.yardline < 0 || p.yardline > 100) return "yardline outside [0,100]";
  if (p.ydstogo < 1) return "ydstogo not positive";
  if (p.yardline >= 1 && p.ydstogo > p.yardline) return "ydstogo exceeds yardline";
  if (p.down < 1 || p.down > 4) return "down outside {1,2,3,4}";
  if (p.posteam_timeouts < 0 || p.posteam_timeouts > 3) return "posteam_timeouts outside {0..3}";
  if (p.defteam_timeouts < 0 || p.defteam_timeouts > 3) return "defteam_timeouts outside {0..3}";
  if (p.receive_2h_ko != 0 && p.receive_2h_ko != 1) return "receive_2h_ko not binary";
  if (p.home != 0 && p.home != 1) return "home not binary";
  if (p.fg_made && *p.fg_made != 0 && *p.fg_made != 1) return "fg_made not binary";
  if (p.next_yardline_after_punt && (*p.next_yardline_after_punt < 0 || *p.next_yardline_after_punt > 100))
    return "next_yardline_after_punt outside [0,100]";
  return {};
}

}  // namespace

const std::vector<std::string>& canonical_fields() {
  static const std::vector<std::string> fields = {
      "game_id",        "drive_id",          "play_index",       "season",
      "win_loss",       "game_seconds_remaining", "score_differential", "total_score",
      "posteam_spread", "total_points_line", "yardline",         "ydstogo",
      "down",           "posteam_timeouts",  "defteam_timeouts", "receive_2h_ko",
      "home",           "roof",              "posteam_coach",    "kicker_id",
      "punter_id",      "play_type",         "yards_gained",     "fg_made",
      "next_yardline_after_punt"};
  return fields;
}

ColumnMap ColumnMap::from_stream(std::istream& in) {
  ColumnMap map;
  const auto& known = canonical_fields();
  std::string line;
  int line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw SchemaError("column map line " + std::to_string(line_no) + ": expected key = value");
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw SchemaError("column map line " + std::to_string(line_no) + ": unknown field '" + key + "'");
    map.set(key, value);
  }
  return map;
}

ColumnMap ColumnMap::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open column map " + path);
  return from_stream(in);
}

void ColumnMap::set(const std::string& canonical, const std::string& header) {
  map_[canonical] = header;
}

std::string ColumnMap::header_for(const std::string& canonical) const {
  auto it = map_.find(canonical);
  return it == map_.end() ? canonical : it->second;
}

IngestResult parse_plays(std::istream& csv, const ColumnMap& schema) {
  IngestResult result;
  auto header = csv::read_record(csv);
  if (!header) throw SchemaError("empty input: header row missing");
  if (!header->empty() && header->front().starts_with("\xEF\xBB\xBF"))
    header->front().erase(0, 3);

  const auto& fields = canonical_fields();
  std::array<int, kFieldCount> column{};
  column.fill(-1);
  std::vector<std::string> missing;
  for (int f = 0; f < kFieldCount; ++f) {
    const auto name = schema.header_for(fields[f]);
    auto it = std::find(header->begin(), header->end(), name);
    if (it != header->end()) {
      column[f] = static_cast<int>(it - header->begin());
    } else if (!is_optional_field(f)) {
      missing.push_back(fields[f] + " (header '" + name + "')");
    }
  }
  if (!missing.empty()) {
    std::string msg = "missing required column(s):";
    for (const auto& m : missing) msg += " " + m;
    throw SchemaError(msg);
  }

  std::size_t row = 0;
  std::vector<std::size_t> accepted_rows;
  while (auto rec = csv::read_record(csv)) {
    if (rec->size() == 1 && rec->front().empty()) continue;  // blank line
    ++row;
    ++result.rows_read;
    auto reject = [&](std::string reason) { result.rejects.push_back({row, std::move(reason)}); };
    if (rec->size() != header->size()) {
      reject("expected " + std::to_string(header->size()) + " fields, found " +
             std::to_string(rec->size()));
      continue;
    }
    auto cell = [&](int f) -> std::string_view {
      return column[f] < 0 ? std::string_view{} : std::string_view((*rec)[column[f]]);
    };

    PlayRecord p;
    std::string error;
    auto req_int = [&](int f, int& out) {
      if (!error.empty()) return;
      auto s = cell(f);
      if (is_missing(s)) {
        error = "missing value for " + fields[f];
        return;
      }
      auto v = parse_integer(s);
      if (!v) {
        error = "unparseable integer in " + fields[f] + ": '" + std::string(s) + "'";
        return;
      }
      out = static_cast<int>(*v);
    };
    auto req_real = [&](int f, double& out) {
      if (!error.empty()) return;
      auto s = cell(f);
      auto v = is_missing(s) ? std::nullopt : parse_real(s);
      if (!v) {
        error = "unparseable number in " + fields[f] + ": '" + std::string(s) + "'";
        return;
      }
      out = *v;
    };
    auto opt_int = [&](int f, std::optional<int>& out) {
      if (!error.empty()) return;
      auto s = cell(f);
      if (is_missing(s)) return;
      auto v = parse_integer(s);
      if (!v) {
        error = "unparseable integer in " + fields[f] + ": '" + std::string(s) + "'";
        return;
      }
      out = static_cast<int>(*v);
    };
    auto opt_str = [&](int f, std::optional<std::string>& out) {
      auto s = cell(f);
      if (!is_missing(s)) out = std::string(s);
    };

    p.game_id = std::string(cell(kGameId));
    p.drive_id = std::string(cell(kDriveId));
    if (p.game_id.empty()) error = "missing value for game_id";
    if (error.empty() && p.drive_id.empty()) error = "missing value for drive_id";
    req_int(kPlayIndex, p.play_index);
    req_int(kSeason, p.season);
    req_int(kWinLoss, p.win_loss);
    req_int(kSeconds, p.game_seconds_remaining);
    req_int(kScoreDiff, p.score_differential);
    req_int(kTotalScore, p.total_score);
    req_real(kSpread, p.posteam_spread);
    req_real(kTotalLine, p.total_points_line);
    req_int(kYardline, p.yardline);
    req_int(kYdstogo, p.ydstogo);
    req_int(kDown, p.down);
    req_int(kPosTimeouts, p.posteam_timeouts);
    req_int(kDefTimeouts, p.defteam_timeouts);
    req_int(kReceive2h, p.receive_2h_ko);
    req_int(kHome, p.home);
    if (error.empty()) {
      auto roof = parse_roof(cell(kRoof));
      if (!roof) error = "unknown roof '" + std::string(cell(kRoof)) + "'";
      else p.roof = *roof;
    }
    p.posteam_coach = std::string(cell(kCoach));
    opt_str(kKicker, p.kicker_id);
    opt_str(kPunter, p.punter_id);
    if (error.empty()) {
      auto type = parse_play_type(cell(kPlayType));
      if (!type) error = "unknown play_type '" + std::string(cell(kPlayType)) + "'";
      else p.play_type = *type;
    }
    opt_int(kYardsGained, p.yards_gained);
    opt_int(kFgMade, p.fg_made);
    opt_int(kNextYardline, p.next_yardline_after_punt);
    if (error.empty()) error = check_invariants(p);
    if (!error.empty()) {
      reject(std::move(error));
      continue;
    }
    result.plays.push_back(std::move(p));
    accepted_rows.push_back(row);
  }
  static_assert(kFirstOptional == kKicker);

  // A drive has a single possession team, so its win/loss label must agree.
  std::unordered_map<std::string, int> drive_label;
  std::set<std::string> inconsistent;
  for (const auto& p : result.plays) {
    auto key = p.game_id + '\x1f' + p.drive_id;
    auto [it, inserted] = drive_label.try_emplace(key, p.win_loss);
    if (!inserted && it->second != p.win_loss) inconsistent.insert(key);
  }
  if (!inconsistent.empty()) {
    std::vector<PlayRecord> kept;
    for (std::size_t i = 0; i < result.plays.size(); ++i) {
      auto& p = result.plays[i];
      if (inconsistent.count(p.game_id + '\x1f' + p.drive_id))
        result.rejects.push_back({accepted_rows[i], "win_loss inconsistent within drive"});
      else
        kept.push_back(std::move(p));
    }
    result.plays = std::move(kept);
    std::sort(result.rejects.begin(), result.rejects.end(),
              [](const RejectedRow& a, const RejectedRow& b) { return a.row_number < b.row_number; });
  }
  return result;
}

void write_plays(std::ostream& out, std::span<const PlayRecord> plays) {
  const auto& fields = canonical_fields();
  for (std::size_t i = 0; i < fields.size(); ++i) out << (i ? "," : "") << fields[i];
  out << '\n';
  auto opt = [](const auto& v) {
    if constexpr (std::is_same_v<std::decay_t<decltype(*v)>, std::string>)
      return v ? csv::escape(*v) : std::string("NA");
    else
      return v ? std::to_string(*v) : std::string("NA");
  };
  for (const auto& p : plays) {
    out << csv::escape(p.game_id) << ',' << csv::escape(p.drive_id) << ',' << p.play_index << ','
        << p.season << ',' << p.win_loss << ',' << p.game_seconds_remaining << ','
        << p.score_differential << ',' << p.total_score << ','
        << csv::format_double(p.posteam_spread) << ',' << csv::format_double(p.total_points_line)
        << ',' << p.yardline << ',' << p.ydstogo << ',' << p.down << ',' << p.posteam_timeouts
        << ',' << p.defteam_timeouts << ',' << p.receive_2h_ko << ',' << p.home << ','
        << to_string(p.roof) << ',' << csv::escape(p.posteam_coach) << ',' << opt(p.kicker_id)
        << ',' << opt(p.punter_id) << ',' << to_string(p.play_type) << ','
        << opt(p.yards_gained) << ',' << opt(p.fg_made) << ',' << opt(p.next_yardline_after_punt)
        << '\n';
  }
}

void write_reject_log(std::ostream& out, std::span<const RejectedRow> rejects) {
  for (const auto& r : rejects) out << r.row_number << '\t' << r.reason << '\n';
}

std::vector<PlayRecord> filter_seasons(std::span<const PlayRecord> plays, int season_min,
                                       int season_max) {
  std::vector<PlayRecord> out;
  for (const auto& p : plays)
    if (p.season >= season_min && p.season <= season_max) out.push_back(p);
  return out;
}

DatasetSplit::Part DatasetSplit::part_of(const std::string& game_id) const {
  auto in = [&](const std::vector<std::string>& ids) {
    return std::binary_search(ids.begin(), ids.end(), game_id);
  };
  if (in(train_game_ids)) return Part::train;
  if (in(tune_game_ids)) return Part::tune;
  if (in(test_game_ids)) return Part::test;
  return Part::none;
}

DatasetSplit make_split(std::span<const PlayRecord> plays, const SplitFractions& fractions,
                        std::uint64_t seed) {
  const std::array<double, 3> frac = {fractions.train, fractions.tune, fractions.test};
  for (double f : frac)
    if (f < 0.0) throw InvalidInput("split fractions must be non-negative");
  if (std::abs(frac[0] + frac[1] + frac[2] - 1.0) > 1e-9)
    throw InvalidInput("split fractions must sum to 1");

  std::set<std::string> unique;
  for (const auto& p : plays) unique.insert(p.game_id);
  std::vector<std::string> games(unique.begin(), unique.end());
  const std::size_t n = games.size();
  const auto nonempty = static_cast<std::size_t>(std::count_if(frac.begin(), frac.end(), [](double f) { return f > 0; }));
  if (n < nonempty)
    throw InvalidInput("need at least " + std::to_string(nonempty) + " games for the requested split, have " +
                       std::to_string(n));

  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(games[i - 1], games[uniform_index(rng, i)]);

  // Largest-remainder allocation, then ensure every requested partition gets a game.
  std::array<std::size_t, 3> count{};
  std::size_t assigned = 0;
  for (int k = 0; k < 3; ++k) {
    count[k] = static_cast<std::size_t>(std::floor(frac[k] * static_cast<double>(n)));
    assigned += count[k];
  }
  while (assigned < n) {
    int best = 0;
    double best_rem = -1;
    for (int k = 0; k < 3; ++k) {
      double rem = frac[k] * static_cast<double>(n) - static_cast<double>(count[k]);
      if (frac[k] > 0 && rem > best_rem) best = k, best_rem = rem;
    }
    ++count[best];
    ++assigned;
  }
  for (int k = 0; k < 3; ++k) {
    if (frac[k] > 0 && count[k] == 0) {
      auto donor = static_cast<int>(std::max_element(count.begin(), count.end()) - count.begin());
      --count[donor];
      ++count[k];
    }
  }

  DatasetSplit split;
  split.seed = seed;
  auto it = games.begin();
  split.train_game_ids.assign(it, it + static_cast<std::ptrdiff_t>(count[0]));
  it += static_cast<std::ptrdiff_t>(count[0]);
  split.tune_game_ids.assign(it, it + static_cast<std::ptrdiff_t>(count[1]));
  it += static_cast<std::ptrdiff_t>(count[1]);
  split.test_game_ids.assign(it, games.end());
  std::sort(split.train_game_ids.begin(), split.train_game_ids.end());
  std::sort(split.tune_game_ids.begin(), split.tune_game_ids.end());
  std::sort(split.test_game_ids.begin(), split.test_game_ids.end());
  return split;
}

std::vector<std::size_t> split_rows(std::span<const PlayRecord> plays, const DatasetSplit& split,
                                    DatasetSplit::Part part) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < plays.size(); ++i) {
    if (split.part_of(plays[i].game_id) != part) continue;
    if (part == DatasetSplit::Part::test && plays[i].down != 1) continue;
    rows.push_back(i);
  }
  return rows;
}

std::vector<std::string> TrainingPools::empty_pools() const {
  std::vector<std::string> names;
  if (punt.empty()) names.emplace_back("punt");
  if (field_goal.empty()) names.emplace_back("field_goal");
  if (conversion.empty()) names.emplace_back("conversion");
  if (first_down.empty()) names.emplace_back("first_down");
  if (fourth_down.empty()) names.emplace_back("fourth_down");
  return names;
}

TrainingPools filter_training_pools(std::span<const PlayRecord> plays) {
  TrainingPools pools;
  for (std::size_t i = 0; i < plays.size(); ++i) {
    const auto& p = plays[i];
    if (p.yardline <= 0 || p.yardline >= 100) continue;
    if (p.play_type == PlayType::punt && p.yardline > 30 && p.next_yardline_after_punt)
      pools.punt.push_back(i);
    if (p.play_type == PlayType::field_goal && p.fg_made) pools.field_goal.push_back(i);
    if ((p.down == 3 || p.down == 4) && p.play_type == PlayType::go && p.yards_gained)
      pools.conversion.push_back(i);
    if (p.down == 1) pools.first_down.push_back(i);
    if (p.down == 4 && (p.play_type == PlayType::go || p.play_type == PlayType::field_goal ||
                        p.play_type == PlayType::punt))
      pools.fourth_down.push_back(i);
  }
  return pools;
}

ClusterIndex build_cluster_index(std::span<const PlayRecord> plays) {
  ClusterIndex index;
  std::unordered_map<std::string, std::size_t> game_pos;
  std::vector<std::unordered_map<std::string, std::size_t>> drive_pos;
  for (std::size_t i = 0; i < plays.size(); ++i) {
    auto [git, gnew] = game_pos.try_emplace(plays[i].game_id, index.games.size());
    if (gnew) {
      index.games.push_back({plays[i].game_id, {}});
      drive_pos.emplace_back();
    }
    auto& game = index.games[git->second];
    auto [dit, dnew] = drive_pos[git->second].try_emplace(plays[i].drive_id, game.drives.size());
    if (dnew) game.drives.emplace_back();
    game.drives[dit->second].push_back(i);
  }
  return index;
}

}  // namespace fourthdown
