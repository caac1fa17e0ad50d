#include "ghiest/core_data.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace ghiest {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool parse_int(std::string_view s, int& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

}  // namespace

Instant parse_instant(std::string_view text) {
  auto s = trim(text);
  if (s.ends_with('Z')) {
    s.remove_suffix(1);
  } else if (s.ends_with("+00:00")) {
    s.remove_suffix(6);
  }
  // YYYY-MM-DDTHH:MM[:SS]
  if (s.size() != 19 && s.size() != 16) throw InputError("unparseable timestamp '" + std::string(text) + "'");
  if (s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':' ||
      (s.size() == 19 && s[16] != ':'))
    throw InputError("unparseable timestamp '" + std::string(text) + "'");
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  bool ok = parse_int(s.substr(0, 4), y) && parse_int(s.substr(5, 2), mo) && parse_int(s.substr(8, 2), d) &&
            parse_int(s.substr(11, 2), h) && parse_int(s.substr(14, 2), mi) &&
            (s.size() == 16 || parse_int(s.substr(17, 2), sec));
  using namespace std::chrono;
  year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ok || !ymd.ok() || h > 23 || mi > 59 || sec > 59 || h < 0 || mi < 0 || sec < 0)
    throw InputError("unparseable timestamp '" + std::string(text) + "'");
  return sys_days{ymd} + hours{h} + minutes{mi} + seconds{sec};
}

std::string format_instant(Instant t) {
  using namespace std::chrono;
  auto day = floor<days>(t);
  year_month_day ymd{day};
  hh_mm_ss hms{t - day};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02lldZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                static_cast<long long>(hms.seconds().count()));
  return buf;
}

int day_of_year(Instant t) {
  using namespace std::chrono;
  auto day = floor<days>(t);
  year_month_day ymd{day};
  sys_days jan1{ymd.year() / January / 1};
  return static_cast<int>((day - jan1).count()) + 1;
}

std::string format_number(double v) {
  if (is_missing(v)) return {};
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

double parse_number(std::string_view text) {
  auto s = trim(text);
  if (s.empty()) return kMissing;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || !std::isfinite(v)) return kMissing;
  return v;
}

void Site::validate() const {
  if (!(latitude >= -90.0 && latitude <= 90.0)) throw InputError("latitude out of range [-90, 90]");
  if (!(longitude >= -180.0 && longitude <= 180.0)) throw InputError("longitude out of range [-180, 180]");
  if (!std::isfinite(altitude)) throw InputError("altitude must be finite");
  if (!(albedo >= 0.0 && albedo <= 1.0)) throw InputError("albedo out of range [0, 1]");
}

void PlantSeries::validate() const {
  if (power.size() != timestamps.size() || temperature.size() != timestamps.size())
    throw InputError("plant '" + plant_id + "': power and temperature must match timestamp count");
  for (std::size_t i = 1; i < timestamps.size(); ++i) {
    if (timestamps[i] <= timestamps[i - 1]) throw InputError("plant '" + plant_id + "': non-monotonic timestamps");
    if (period.count() > 0 && timestamps[i] - timestamps[i - 1] != period)
      throw InputError("plant '" + plant_id + "': non-uniform sampling");
  }
  for (double p : power)
    if (!is_missing(p) && p < 0.0) throw InputError("plant '" + plant_id + "': negative power");
}

PlantSeries load_plant_csv(const std::filesystem::path& path, const std::string& plant_id,
                           std::optional<Seconds> expected_period) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open plant file '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw InputError("empty plant file '" + path.string() + "'");
  auto header = split_fields(line);
  if (header.size() < 3 || header[0] != "timestamp" || header[1] != "power_w" || header[2] != "temp_c")
    throw InputError("plant file '" + path.string() + "': expected header timestamp,power_w,temp_c");

  std::vector<Instant> ts;
  std::vector<double> power, temp;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto f = split_fields(line);
    if (f.size() < 3) f.resize(3);
    auto t = parse_instant(f[0]);
    if (!ts.empty() && t <= ts.back()) throw InputError("plant '" + plant_id + "': non-monotonic timestamps");
    double p = parse_number(f[1]);
    if (!is_missing(p) && p < 0.0) p = kMissing;
    ts.push_back(t);
    power.push_back(p);
    temp.push_back(parse_number(f[2]));
  }
  if (ts.empty()) throw InputError("empty plant file '" + path.string() + "'");

  Seconds period = expected_period.value_or(Seconds{0});
  if (period.count() <= 0) {
    period = Seconds{0};
    for (std::size_t i = 1; i < ts.size(); ++i) period = Seconds{std::gcd(period.count(), (ts[i] - ts[i - 1]).count())};
    if (period.count() == 0) throw InputError("plant '" + plant_id + "': cannot infer sampling period from one row");
  }

  PlantSeries s;
  s.plant_id = plant_id;
  s.period = period;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (i > 0) {
      auto gap = ts[i] - ts[i - 1];
      if (gap % period != Seconds{0}) throw InputError("plant '" + plant_id + "': non-uniform sampling");
      for (auto t = ts[i - 1] + period; t < ts[i]; t += period) {
        s.timestamps.push_back(t);
        s.power.push_back(kMissing);
        s.temperature.push_back(kMissing);
      }
    }
    s.timestamps.push_back(ts[i]);
    s.power.push_back(power[i]);
    s.temperature.push_back(temp[i]);
  }
  return s;
}

void write_plant_csv(const std::filesystem::path& path, const PlantSeries& series) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << "timestamp,power_w,temp_c\n";
  for (std::size_t i = 0; i < series.size(); ++i)
    out << format_instant(series.timestamps[i]) << ',' << format_number(series.power[i]) << ','
        << format_number(series.temperature[i]) << '\n';
}

AlignedDataset align(std::span<const PlantSeries> plants, const Site& site) {
  if (plants.empty()) throw InputError("align: at least one plant is required");
  site.validate();
  const Seconds period = plants.front().period;
  if (period.count() <= 0) throw InputError("align: plant '" + plants.front().plant_id + "' has no sampling period");
  Instant start = Instant::min(), end = Instant::max();
  for (const auto& p : plants) {
    if (p.period != period) throw InputError("mismatched sampling periods");
    if (p.timestamps.empty()) throw InputError("empty intersection");
    if ((p.timestamps.front() - plants.front().timestamps.front()) % period != Seconds{0})
      throw InputError("misaligned sampling grids");
    start = std::max(start, p.timestamps.front());
    end = std::min(end, p.timestamps.back());
  }
  if (start > end) throw InputError("empty intersection");

  AlignedDataset ds;
  ds.site = site;
  for (auto t = start; t <= end; t += period) ds.timestamps.push_back(t);
  for (const auto& p : plants) {
    PlantSeries q;
    q.plant_id = p.plant_id;
    q.period = period;
    q.timestamps = ds.timestamps;
    q.power.assign(ds.steps(), kMissing);
    q.temperature.assign(ds.steps(), kMissing);
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p.timestamps[i] < start || p.timestamps[i] > end) continue;
      auto k = static_cast<std::size_t>((p.timestamps[i] - start) / period);
      q.power[k] = p.power[i];
      q.temperature[k] = p.temperature[i];
    }
    ds.plants.push_back(std::move(q));
  }
  return ds;
}

SiteConfig load_site_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw InputError("site config '" + path.string() + "' does not exist");
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw InputError(std::string("site config: ") + e.what());
  }
  const auto& node = tree.get_child_optional("site") ? tree.get_child("site") : tree;
  SiteConfig cfg;
  for (const auto& [key, value] : node) {
    if (!value.empty()) continue;  // a section
    double v = parse_number(value.data());
    if (is_missing(v)) throw InputError("site config: bad value for '" + key + "'");
    if (key == "latitude") cfg.site.latitude = v;
    else if (key == "longitude") cfg.site.longitude = v;
    else if (key == "altitude") cfg.site.altitude = v;
    else if (key == "albedo") cfg.site.albedo = v;
    else if (key == "sampling_seconds") cfg.sampling = Seconds{static_cast<long long>(v)};
    else throw InputError("site config: unknown key '" + key + "'");
  }
  cfg.site.validate();
  return cfg;
}

}  // namespace ghiest
