#pragma once

// Rating-log parsing, identifier remapping and time windowing.

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "tgmc/checkpoint.hpp"
#include "tgmc/errors.hpp"

namespace tgmc {

inline constexpr std::int64_t kSecondsPerDay = 86400;
inline constexpr std::string_view kWindowMagic = "TGMCWIN1";

struct RatingEvent {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  std::uint8_t rating = 0;
  std::int64_t timestamp = 0;

  friend bool operator==(const RatingEvent&, const RatingEvent&) = default;
};

/// Bijection between raw identifiers and dense indices, assigned in
/// first-appearance order.
class IdMap {
 public:
  std::uint32_t intern(std::string_view raw) {
    auto it = index_.find(std::string(raw));
    if (it != index_.end()) return it->second;
    const auto idx = static_cast<std::uint32_t>(raw_.size());
    raw_.emplace_back(raw);
    index_.emplace(raw_.back(), idx);
    return idx;
  }

  std::optional<std::uint32_t> find(std::string_view raw) const {
    auto it = index_.find(std::string(raw));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const std::string& raw(std::uint32_t idx) const { return raw_.at(idx); }
  std::size_t size() const { return raw_.size(); }
  bool empty() const { return raw_.empty(); }
  const std::vector<std::string>& raw_ids() const { return raw_; }

  static IdMap from_raw(const std::vector<std::string>& raw) {
    IdMap m;
    for (const auto& r : raw) m.intern(r);
    if (m.size() != raw.size()) throw ValidationError("duplicate raw id in id map");
    return m;
  }

 private:
  std::vector<std::string> raw_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

struct ParsedRatings {
  std::vector<RatingEvent> events;
  IdMap users;
  IdMap items;
};

enum class RatingFormat { movielens_1m, netflix_monthly, csv };

inline RatingFormat parse_rating_format(std::string_view name) {
  if (name == "movielens-1m") return RatingFormat::movielens_1m;
  if (name == "netflix-monthly") return RatingFormat::netflix_monthly;
  if (name == "csv") return RatingFormat::csv;
  throw ValidationError("unknown rating format '" + std::string(name) + "'");
}

inline std::string to_string(RatingFormat f) {
  switch (f) {
    case RatingFormat::movielens_1m: return "movielens-1m";
    case RatingFormat::netflix_monthly: return "netflix-monthly";
    case RatingFormat::csv: return "csv";
  }
  return "?";
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view s, std::string_view sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = s.find(sep, pos);
    if (next == std::string_view::npos) {
      out.push_back(trim(s.substr(pos)));
      return out;
    }
    out.push_back(trim(s.substr(pos, next - pos)));
    pos = next + sep.size();
  }
}

template <typename Int>
std::optional<Int> to_int(std::string_view s) {
  Int v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

}  // namespace detail

/// Seconds since the Unix epoch at 00:00:00 UTC of a `YYYY-MM-DD` date.
inline std::optional<std::int64_t> parse_date_utc(std::string_view text) {
  namespace chr = std::chrono;
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  const auto y = detail::to_int<int>(text.substr(0, 4));
  const auto m = detail::to_int<unsigned>(text.substr(5, 2));
  const auto d = detail::to_int<unsigned>(text.substr(8, 2));
  if (!y || !m || !d) return std::nullopt;
  const chr::year_month_day ymd{chr::year{*y}, chr::month{*m}, chr::day{*d}};
  if (!ymd.ok()) return std::nullopt;
  return chr::duration_cast<chr::seconds>(chr::sys_days{ymd}.time_since_epoch()).count();
}

inline std::string format_date_utc(std::int64_t ts) {
  namespace chr = std::chrono;
  const auto days = chr::floor<chr::days>(chr::sys_seconds{chr::seconds{ts}});
  const chr::year_month_day ymd{days};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

/// Parses a rating log.
///
///   movielens-1m     `UserID::MovieID::Rating::Timestamp`
///   csv              `user,item,rating,timestamp`, optional header row
///   netflix-monthly  `MovieID:` header lines followed by
///                    `CustomerID,Rating,YYYY-MM-DD`; a four-field
///                    `user,item,rating,YYYY-MM-DD` line is also accepted
///
/// Blank lines are skipped; CRLF endings are accepted. Events keep input
/// order and raw ids are remapped by first appearance.
inline ParsedRatings parse_ratings(std::istream& in, RatingFormat format, int max_rating = 5) {
  ParsedRatings out;
  std::string line;
  std::size_t line_no = 0;
  std::string current_movie;
  bool seen_data = false;

  auto push = [&](std::string_view user, std::string_view item, std::string_view rating,
                  std::int64_t ts) {
    const auto r = detail::to_int<int>(rating);
    if (!r) throw ParseError(line_no, "rating is not an integer: '" + std::string(rating) + "'");
    if (*r < 1 || *r > max_rating)
      throw ValidationError("line " + std::to_string(line_no) + ": rating " + std::to_string(*r) +
                            " outside [1," + std::to_string(max_rating) + "]");
    if (ts < 0) throw ValidationError("line " + std::to_string(line_no) + ": negative timestamp");
    if (user.empty() || item.empty()) throw ParseError(line_no, "empty identifier");
    RatingEvent e;
    e.user = out.users.intern(user);
    e.item = out.items.intern(item);
    e.rating = static_cast<std::uint8_t>(*r);
    e.timestamp = ts;
    out.events.push_back(e);
  };

  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view text = detail::trim(line);
    if (text.empty()) continue;
    switch (format) {
      case RatingFormat::movielens_1m: {
        const auto f = detail::split(text, "::");
        if (f.size() != 4) throw ParseError(line_no, "expected UserID::MovieID::Rating::Timestamp");
        const auto ts = detail::to_int<std::int64_t>(f[3]);
        if (!ts) throw ParseError(line_no, "bad timestamp '" + std::string(f[3]) + "'");
        push(f[0], f[1], f[2], *ts);
        break;
      }
      case RatingFormat::csv: {
        const auto f = detail::split(text, ",");
        if (f.size() != 4) throw ParseError(line_no, "expected user,item,rating,timestamp");
        const auto ts = detail::to_int<std::int64_t>(f[3]);
        if (!ts) {
          if (!seen_data && !detail::to_int<int>(f[2])) {
            seen_data = true;  // header row
            break;
          }
          throw ParseError(line_no, "bad timestamp '" + std::string(f[3]) + "'");
        }
        seen_data = true;
        push(f[0], f[1], f[2], *ts);
        break;
      }
      case RatingFormat::netflix_monthly: {
        if (text.back() == ':') {
          current_movie = std::string(detail::trim(text.substr(0, text.size() - 1)));
          if (current_movie.empty()) throw ParseError(line_no, "empty movie header");
          break;
        }
        const auto f = detail::split(text, ",");
        std::string_view user, item, rating, date;
        if (f.size() == 3) {
          if (current_movie.empty()) throw ParseError(line_no, "rating line before any 'MovieID:' header");
          user = f[0];
          item = current_movie;
          rating = f[1];
          date = f[2];
        } else if (f.size() == 4) {
          user = f[0];
          item = f[1];
          rating = f[2];
          date = f[3];
        } else {
          throw ParseError(line_no, "expected CustomerID,Rating,YYYY-MM-DD");
        }
        const auto ts = parse_date_utc(date);
        if (!ts) throw ParseError(line_no, "bad date '" + std::string(date) + "'");
        push(user, item, rating, *ts);
        break;
      }
    }
  }
  return out;
}

inline ParsedRatings parse_ratings_file(const std::filesystem::path& path, RatingFormat format,
                                        int max_rating = 5) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("cannot open " + path.string());
  return parse_ratings(in, format, max_rating);
}

/// Writes events back in `format` using the raw identifiers.
inline void write_ratings(std::ostream& os, const ParsedRatings& data, RatingFormat format) {
  std::optional<std::uint32_t> current_item;
  for (const auto& e : data.events) {
    const auto& u = data.users.raw(e.user);
    const auto& i = data.items.raw(e.item);
    const int r = e.rating;
    switch (format) {
      case RatingFormat::movielens_1m:
        os << u << "::" << i << "::" << r << "::" << e.timestamp << '\n';
        break;
      case RatingFormat::csv:
        os << u << ',' << i << ',' << r << ',' << e.timestamp << '\n';
        break;
      case RatingFormat::netflix_monthly:
        if (e.timestamp % kSecondsPerDay != 0)
          throw ValidationError("netflix-monthly can only store midnight timestamps");
        if (current_item != e.item) {
          os << i << ":\n";
          current_item = e.item;
        }
        os << u << ',' << r << ',' << format_date_utc(e.timestamp) << '\n';
        break;
    }
  }
}

struct WindowingConfig {
  std::int64_t window_length_seconds = 91 * kSecondsPerDay;
  bool accumulative = true;
  std::size_t train_windows = 1;
  /// Start of window 1; defaults to the earliest event.
  std::optional<std::int64_t> origin;

  void validate() const {
    if (window_length_seconds <= 0) throw ValidationError("window length must be positive");
    if (train_windows < 1) throw ValidationError("train_windows must be at least 1");
  }
};

struct DatasetStats {
  std::uint32_t num_users = 0;
  std::uint32_t num_items = 0;
  int max_rating = 5;
  std::size_t num_windows = 0;
};

using WindowEvents = std::vector<RatingEvent>;

/// Time-partitioned ratings. `raw_windows` is the disjoint partition;
/// `windows` is the training view (nested unions when accumulative).
struct WindowedDataset {
  std::vector<WindowEvents> raw_windows;
  std::vector<WindowEvents> windows;
  DatasetStats stats;
  IdMap users;
  IdMap items;
  WindowingConfig config;
  std::int64_t origin = 0;
  std::vector<std::string> warnings;

  std::size_t num_windows() const { return stats.num_windows; }

  /// 0-based window index of a timestamp.
  std::size_t window_of(std::int64_t ts) const {
    if (ts < origin) throw ValidationError("timestamp precedes window origin");
    return static_cast<std::size_t>((ts - origin) / config.window_length_seconds);
  }

  std::int64_t window_start(std::size_t t0) const {
    return origin + static_cast<std::int64_t>(t0) * config.window_length_seconds;
  }

  double density(std::size_t t0, bool raw = false) const {
    const auto& w = raw ? raw_windows.at(t0) : windows.at(t0);
    const double cells = static_cast<double>(stats.num_users) * static_cast<double>(stats.num_items);
    return cells > 0 ? static_cast<double>(w.size()) / cells : 0.0;
  }
};

namespace detail {

/// Keeps the latest-timestamp rating per (user, item); among equal
/// timestamps the later input position wins. Output sorted by (user, item).
inline WindowEvents dedup_latest(const WindowEvents& events) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, RatingEvent> latest;
  for (const auto& e : events) {
    auto [it, inserted] = latest.try_emplace({e.user, e.item}, e);
    if (!inserted && e.timestamp >= it->second.timestamp) it->second = e;
  }
  WindowEvents out;
  out.reserve(latest.size());
  for (auto& kv : latest) out.push_back(kv.second);
  return out;
}

inline std::vector<WindowEvents> accumulate(const std::vector<WindowEvents>& raw) {
  std::vector<WindowEvents> out;
  out.reserve(raw.size());
  WindowEvents running;
  for (const auto& w : raw) {
    running.insert(running.end(), w.begin(), w.end());
    running = dedup_latest(running);
    out.push_back(running);
  }
  return out;
}

}  // namespace detail

/// Partitions events into consecutive half-open windows
/// [origin + t*len, origin + (t+1)*len).
inline WindowedDataset build_windows(std::span<const RatingEvent> events, const WindowingConfig& config,
                                     const DatasetStats& bounds) {
  config.validate();
  if (events.empty()) throw ValidationError("build_windows: no events");
  WindowedDataset ds;
  ds.config = config;
  ds.stats = bounds;

  auto [lo, hi] = std::minmax_element(events.begin(), events.end(),
                                      [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
  ds.origin = config.origin.value_or(lo->timestamp);
  if (ds.origin > lo->timestamp) throw ValidationError("window origin is after the first event");
  ds.config.origin = ds.origin;
  const std::int64_t span = hi->timestamp - ds.origin + 1;
  const auto num = static_cast<std::size_t>((span + config.window_length_seconds - 1) / config.window_length_seconds);
  ds.stats.num_windows = num;
  if (num == 1)
    ds.warnings.push_back("window length covers the whole time span: a single window (static model)");

  std::vector<WindowEvents> buckets(num);
  for (const auto& e : events) {
    if (e.user >= bounds.num_users || e.item >= bounds.num_items)
      throw ValidationError("event index outside dataset bounds");
    if (e.rating < 1 || e.rating > bounds.max_rating) throw ValidationError("event rating outside [1,R]");
    buckets[ds.window_of(e.timestamp)].push_back(e);
  }
  for (auto& b : buckets) ds.raw_windows.push_back(detail::dedup_latest(b));
  ds.windows = config.accumulative ? detail::accumulate(ds.raw_windows) : ds.raw_windows;
  return ds;
}

inline WindowedDataset build_windows(std::span<const RatingEvent> events, const WindowingConfig& config,
                                     int max_rating = 5) {
  DatasetStats bounds;
  bounds.max_rating = max_rating;
  for (const auto& e : events) {
    bounds.num_users = std::max(bounds.num_users, e.user + 1);
    bounds.num_items = std::max(bounds.num_items, e.item + 1);
  }
  return build_windows(events, config, bounds);
}

inline WindowedDataset build_windows(const ParsedRatings& parsed, const WindowingConfig& config,
                                     int max_rating = 5) {
  DatasetStats bounds;
  bounds.num_users = static_cast<std::uint32_t>(parsed.users.size());
  bounds.num_items = static_cast<std::uint32_t>(parsed.items.size());
  bounds.max_rating = max_rating;
  auto ds = build_windows(parsed.events, config, bounds);
  ds.users = parsed.users;
  ds.items = parsed.items;
  return ds;
}

struct TrainTestSplit {
  std::vector<WindowEvents> train;  ///< windows 1..T_train (training view)
  std::vector<WindowEvents> test;   ///< windows T_train+1..T, always raw
  std::size_t train_windows = 0;
};

inline TrainTestSplit train_test_split(const WindowedDataset& ds, std::size_t train_windows) {
  if (train_windows < 1 || ds.num_windows() <= train_windows)
    throw ValidationError("train_test_split: need 1 <= train_windows < T (T=" +
                          std::to_string(ds.num_windows()) + ", train_windows=" +
                          std::to_string(train_windows) + ")");
  TrainTestSplit s;
  s.train_windows = train_windows;
  s.train.assign(ds.windows.begin(), ds.windows.begin() + static_cast<std::ptrdiff_t>(train_windows));
  s.test.assign(ds.raw_windows.begin() + static_cast<std::ptrdiff_t>(train_windows), ds.raw_windows.end());
  return s;
}

inline TrainTestSplit train_test_split(const WindowedDataset& ds) {
  return train_test_split(ds, ds.config.train_windows);
}

// Serialized form: manifest.json plus window_NNN.bin per raw window.

inline void write_window_binary(std::ostream& os, const WindowEvents& events) {
  os.write(kWindowMagic.data(), static_cast<std::streamsize>(kWindowMagic.size()));
  io::put_u32(os, static_cast<std::uint32_t>(events.size()));
  for (const auto& e : events) {
    io::put_u32(os, e.user);
    io::put_u32(os, e.item);
    os.put(static_cast<char>(e.rating));
    io::put_u64(os, static_cast<std::uint64_t>(e.timestamp));
  }
}

inline WindowEvents read_window_binary(std::istream& is) {
  io::expect_magic(is, kWindowMagic, "window file");
  const auto count = io::get_u32(is);
  WindowEvents events(count);
  for (auto& e : events) {
    e.user = io::get_u32(is);
    e.item = io::get_u32(is);
    char r;
    if (!is.get(r)) throw ValidationError("window file: truncated record");
    e.rating = static_cast<std::uint8_t>(r);
    e.timestamp = static_cast<std::int64_t>(io::get_u64(is));
  }
  return events;
}

inline std::string window_file_name(std::size_t t0) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "window_%03zu.bin", t0 + 1);
  return buf;
}

inline nlohmann::json manifest_json(const WindowedDataset& ds) {
  nlohmann::json j;
  j["format"] = "tgmc-windows-v1";
  std::size_t total = 0;
  for (const auto& w : ds.raw_windows) total += w.size();
  j["stats"] = {{"num_users", ds.stats.num_users},
                {"num_items", ds.stats.num_items},
                {"max_rating", ds.stats.max_rating},
                {"num_windows", ds.stats.num_windows},
                {"num_events", total}};
  j["config"] = {{"window_length_seconds", ds.config.window_length_seconds},
                 {"accumulative", ds.config.accumulative},
                 {"train_windows", ds.config.train_windows},
                 {"origin", ds.origin}};
  auto& wins = j["windows"];
  wins = nlohmann::json::array();
  for (std::size_t t = 0; t < ds.raw_windows.size(); ++t) {
    wins.push_back({{"index", t + 1},
                    {"file", window_file_name(t)},
                    {"start", ds.window_start(t)},
                    {"end", ds.window_start(t + 1)},
                    {"events", ds.raw_windows[t].size()},
                    {"training_events", ds.windows[t].size()}});
  }
  j["users"] = ds.users.raw_ids();
  j["items"] = ds.items.raw_ids();
  j["warnings"] = ds.warnings;
  return j;
}

inline void save_dataset(const std::filesystem::path& dir, const WindowedDataset& ds) {
  std::filesystem::create_directories(dir);
  for (std::size_t t = 0; t < ds.raw_windows.size(); ++t) {
    std::ofstream os(dir / window_file_name(t), std::ios::binary);
    if (!os) throw Error("cannot write " + (dir / window_file_name(t)).string());
    write_window_binary(os, ds.raw_windows[t]);
  }
  io::write_json(dir / "manifest.json", manifest_json(ds));
}

inline WindowedDataset load_dataset(const std::filesystem::path& dir) {
  const auto j = io::read_json(dir / "manifest.json");
  WindowedDataset ds;
  const auto& st = j.at("stats");
  ds.stats.num_users = st.at("num_users").get<std::uint32_t>();
  ds.stats.num_items = st.at("num_items").get<std::uint32_t>();
  ds.stats.max_rating = st.at("max_rating").get<int>();
  ds.stats.num_windows = st.at("num_windows").get<std::size_t>();
  const auto& cfg = j.at("config");
  ds.config.window_length_seconds = cfg.at("window_length_seconds").get<std::int64_t>();
  ds.config.accumulative = cfg.at("accumulative").get<bool>();
  ds.config.train_windows = cfg.at("train_windows").get<std::size_t>();
  ds.origin = cfg.at("origin").get<std::int64_t>();
  ds.config.origin = ds.origin;
  ds.users = IdMap::from_raw(j.at("users").get<std::vector<std::string>>());
  ds.items = IdMap::from_raw(j.at("items").get<std::vector<std::string>>());
  ds.warnings = j.at("warnings").get<std::vector<std::string>>();
  for (const auto& w : j.at("windows")) {
    std::ifstream is(dir / w.at("file").get<std::string>(), std::ios::binary);
    if (!is) throw MissingArtifactError("missing window file " + w.at("file").get<std::string>());
    ds.raw_windows.push_back(read_window_binary(is));
  }
  if (ds.raw_windows.size() != ds.stats.num_windows) throw ValidationError("manifest window count mismatch");
  ds.windows = ds.config.accumulative ? detail::accumulate(ds.raw_windows) : ds.raw_windows;
  return ds;
}

/// Same dataset with the accumulation flag switched.
inline WindowedDataset with_accumulation(WindowedDataset ds, bool accumulative) {
  ds.config.accumulative = accumulative;
  ds.windows = accumulative ? detail::accumulate(ds.raw_windows) : ds.raw_windows;
  return ds;
}

}  // namespace tgmc
