#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "illiq/errors.hpp"
#include "illiq/surface.hpp"

namespace illiq {

Surface::Surface(Grid grid, std::vector<double> values) : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.size() != grid_.M() * grid_.N()) throw ConfigError("surface size does not match its grid");
}

double Surface::at(std::size_t level, double s) const {
  const auto& x = grid_.s();
  if (s <= x.front()) return (*this)(level, 0);
  if (s >= x.back()) return (*this)(level, x.size() - 1);
  const auto j = static_cast<std::size_t>(std::upper_bound(x.begin(), x.end(), s) - x.begin());
  const double w = (s - x[j - 1]) / (x[j] - x[j - 1]);
  return (1.0 - w) * (*this)(level, j - 1) + w * (*this)(level, j);
}

bool Surface::operator==(const Surface& o) const {
  return grid_.same_as(o.grid_) && values_ == o.values_ && meta == o.meta && epsilon == o.epsilon &&
         order == o.order;
}

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

double parse_double(std::string_view text, const std::string& where) {
  double v = 0.0;
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (r.ec != std::errc{}) throw DataError("not a number in " + where + ": '" + std::string(text) + "'");
  return v;
}

}  // namespace

void write_csv(const Surface& surface, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "# epsilon: " << format_double(surface.epsilon) << '\n';
  out << "# order: " << surface.order << '\n';
  for (const auto& [k, v] : surface.meta) out << "# " << k << ": " << v << '\n';
  out << "t,s,value\n";
  const auto& g = surface.grid();
  for (std::size_t n = 0; n < g.N(); ++n)
    for (std::size_t i = 0; i < g.M(); ++i)
      out << format_double(g.t()[n]) << ',' << format_double(g.s()[i]) << ',' << format_double(surface(n, i)) << '\n';
  if (!out) throw ConfigError("write failed for " + path.string());
}

Surface read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::map<std::string, std::string> meta;
  double epsilon = 0.0;
  int order = 0;
  std::vector<double> ts, ss, vs;
  std::string line;
  bool header = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto colon = line.find(": ");
      if (colon == std::string::npos || colon < 2) throw DataError("bad meta line " + std::to_string(lineno));
      const std::string key = line.substr(2, colon - 2);
      const std::string value = line.substr(colon + 2);
      if (key == "epsilon")
        epsilon = parse_double(value, "meta epsilon");
      else if (key == "order")
        order = static_cast<int>(parse_double(value, "meta order"));
      else
        meta[key] = value;
      continue;
    }
    if (!header) {
      if (line != "t,s,value") throw DataError("expected header t,s,value");
      header = true;
      continue;
    }
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) throw DataError("bad row " + std::to_string(lineno));
    const std::string where = "row " + std::to_string(lineno);
    const std::string_view view(line);
    ts.push_back(parse_double(view.substr(0, c1), where));
    ss.push_back(parse_double(view.substr(c1 + 1, c2 - c1 - 1), where));
    vs.push_back(parse_double(view.substr(c2 + 1), where));
  }
  if (ts.empty()) throw DataError("surface CSV has no rows");
  // Rows are ordered by time level, then spot.
  std::size_t M = 1;
  while (M < ts.size() && ts[M] == ts[0]) ++M;
  if (ts.size() % M != 0) throw DataError("surface CSV is not a full M x N table");
  const std::size_t N = ts.size() / M;
  std::vector<double> s(ss.begin(), ss.begin() + static_cast<std::ptrdiff_t>(M));
  Grid grid(std::move(s), ts.back(), N);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t i = 0; i < M; ++i)
      if (ss[n * M + i] != grid.s()[i] || std::abs(ts[n * M + i] - grid.t()[n]) > 1e-12 * grid.T())
        throw DataError("surface CSV rows do not form a tensor grid");
  Surface out(std::move(grid), std::move(vs));
  out.meta = std::move(meta);
  out.epsilon = epsilon;
  out.order = order;
  return out;
}

namespace {

static_assert(std::endian::native == std::endian::little, "binary layout assumes a little-endian host");

constexpr char kMagic[8] = {'I', 'L', 'Q', 'S', 'U', 'R', 'F', '1'};

template <class T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw DataError("truncated binary surface");
  return v;
}

void put_string(std::ofstream& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::ifstream& in) {
  const auto n = get<std::uint64_t>(in);
  if (n > (1u << 20)) throw DataError("implausible string length in binary surface");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw DataError("truncated binary surface");
  return s;
}

}  // namespace

void write_binary(const Surface& surface, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  const auto& g = surface.grid();
  out.write(kMagic, sizeof kMagic);
  put<std::uint64_t>(out, g.M());
  put<std::uint64_t>(out, g.N());
  put<double>(out, g.s_min());
  put<double>(out, g.s_max());
  put<double>(out, g.T());
  put<double>(out, surface.epsilon);
  put<std::int64_t>(out, surface.order);
  put<std::uint64_t>(out, surface.meta.size());
  for (const auto& [k, v] : surface.meta) {
    put_string(out, k);
    put_string(out, v);
  }
  out.write(reinterpret_cast<const char*>(g.s().data()), static_cast<std::streamsize>(g.M() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(surface.values().data()),
            static_cast<std::streamsize>(surface.values().size() * sizeof(double)));
  if (!out) throw ConfigError("write failed for " + path.string());
}

Surface read_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw DataError("not a binary surface file");
  const auto M = get<std::uint64_t>(in);
  const auto N = get<std::uint64_t>(in);
  if (M < 3 || N < 2 || M * N > (std::uint64_t{1} << 34)) throw DataError("implausible binary surface size");
  get<double>(in);  // s_min and s_max repeat the node vector ends
  get<double>(in);
  const double T = get<double>(in);
  const double epsilon = get<double>(in);
  const auto order = get<std::int64_t>(in);
  const auto count = get<std::uint64_t>(in);
  std::map<std::string, std::string> meta;
  for (std::uint64_t k = 0; k < count; ++k) {
    std::string key = get_string(in);
    meta[key] = get_string(in);
  }
  std::vector<double> s(M), values(M * N);
  in.read(reinterpret_cast<char*>(s.data()), static_cast<std::streamsize>(M * sizeof(double)));
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(M * N * sizeof(double)));
  if (!in) throw DataError("truncated binary surface");
  Surface out(Grid(std::move(s), T, N), std::move(values));
  out.meta = std::move(meta);
  out.epsilon = epsilon;
  out.order = static_cast<int>(order);
  return out;
}

}  // namespace illiq
