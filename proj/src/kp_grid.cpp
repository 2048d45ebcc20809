#include "thetalab/kp_grid.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <map>

#include "thetalab/error.hpp"
#include "thetalab/parallel.hpp"

namespace thetalab {

namespace {

constexpr std::array<double, 5> kFirst{1.0 / 12, -8.0 / 12, 0.0, 8.0 / 12,
                                       -1.0 / 12};
constexpr std::array<double, 5> kSecond{-1.0 / 12, 16.0 / 12, -30.0 / 12,
                                        16.0 / 12, -1.0 / 12};
constexpr std::array<double, 7> kFourth{-1.0 / 6, 12.0 / 6,  -39.0 / 6, 56.0 / 6,
                                        -39.0 / 6, 12.0 / 6, -1.0 / 6};

}  // namespace

GridSpec unit_step_grid(const DirectionJet& jet, int nx, int ny, int nt,
                        double h, double x0, double y0, double t0) {
  if (!(h > 0.0)) throw Error(ErrorCode::kInvalidInput, "grid step must be positive");
  auto step = [h](double len) { return len > 0.0 ? h / len : h; };
  const double lu = jet.U ? jet.U->norm() : 0.0;
  const double lv = jet.V ? jet.V->norm() : 0.0;
  const double lt = jet.U && jet.W ? kp_time_direction(jet).norm() : 0.0;
  return GridSpec{{x0, step(lu), nx}, {y0, step(lv), ny}, {t0, step(lt), nt}};
}

KpGrid kp_field_grid(const GridSpec& spec, const AbelianPoint& z,
                     const RiemannMatrix& tau, const DirectionJet& jet,
                     unsigned threads) {
  if (spec.x.count < 0 || spec.y.count < 0 || spec.t.count < 0)
    throw Error(ErrorCode::kInvalidInput, "negative grid size");
  KpGrid grid;
  grid.spec = spec;
  const std::size_t nx = spec.x.count, ny = spec.y.count;
  grid.u = parallel_map(
      spec.nodes(),
      [&](std::size_t n) -> std::optional<Complex> {
        const int i = static_cast<int>(n % nx);
        const int j = static_cast<int>((n / nx) % ny);
        const int k = static_cast<int>(n / (nx * ny));
        try {
          return kp_field_u(spec.x.at(i), spec.y.at(j), spec.t.at(k), z, tau,
                            jet);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::kPole) throw;
          return std::nullopt;
        }
      },
      threads);
  return grid;
}

std::optional<double> kp_stencil_residual(const KpGrid& grid, int i, int j,
                                          int k) {
  const GridSpec& s = grid.spec;
  if (i < kStencilReachX || i + kStencilReachX >= s.x.count ||
      j < kStencilReachYT || j + kStencilReachYT >= s.y.count ||
      k < kStencilReachYT || k + kStencilReachYT >= s.t.count)
    return std::nullopt;
  bool pole = false;
  auto u = [&](int di, int dj, int dk) {
    const auto& v = grid.at(i + di, j + dj, k + dk);
    if (!v) {
      pole = true;
      return Complex{};
    }
    return *v;
  };
  const double hx = s.x.step, hy = s.y.step, ht = s.t.step;
  Complex ux{}, uxx{}, uyy{}, uxt{}, uxxxx{};
  for (int m = 0; m < 5; ++m) {
    ux += kFirst[m] * u(m - 2, 0, 0);
    uxx += kSecond[m] * u(m - 2, 0, 0);
    uyy += kSecond[m] * u(0, m - 2, 0);
    for (int l = 0; l < 5; ++l)
      if (kFirst[m] != 0.0 && kFirst[l] != 0.0)
        uxt += kFirst[m] * kFirst[l] * u(m - 2, 0, l - 2);
  }
  for (int m = 0; m < 7; ++m) uxxxx += kFourth[m] * u(m - 3, 0, 0);
  if (pole) return std::nullopt;
  ux /= hx;
  uxx /= hx * hx;
  uyy /= hy * hy;
  uxt /= hx * ht;
  uxxxx /= hx * hx * hx * hx;
  const Complex u0 = u(0, 0, 0);
  const std::array<Complex, 5> terms{3.0 * uyy, -4.0 * uxt, 6.0 * ux * ux,
                                     6.0 * u0 * uxx, uxxxx};
  Complex sum{};
  double abs_sum = 0.0;
  for (const Complex& v : terms) {
    sum += v;
    abs_sum += std::abs(v);
  }
  if (abs_sum == 0.0) return 0.0;
  return std::abs(sum) / abs_sum;
}

KpGridCheck kp_grid_check(const KpGrid& grid) {
  KpGridCheck out;
  const GridSpec& s = grid.spec;
  for (int k = kStencilReachYT; k + kStencilReachYT < s.t.count; ++k)
    for (int j = kStencilReachYT; j + kStencilReachYT < s.y.count; ++j)
      for (int i = kStencilReachX; i + kStencilReachX < s.x.count; ++i) {
        const auto r = kp_stencil_residual(grid, i, j, k);
        if (!r) {
          ++out.skipped;
          continue;
        }
        ++out.checked;
        out.max_residual = std::max(out.max_residual, *r);
      }
  return out;
}

namespace {

void append_number(std::string& out, double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  out.append(buf, static_cast<std::size_t>(n));
}

double parse_number(std::string_view field, std::size_t line) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || end != field.data() + field.size())
    throw Error(ErrorCode::kParseError,
                "grid csv line " + std::to_string(line) + ": bad number '" +
                    std::string(field) + "'");
  return v;
}

GridAxis axis_from(const std::map<double, int>& values) {
  GridAxis a;
  a.count = static_cast<int>(values.size());
  if (a.count == 0) return a;
  a.start = values.begin()->first;
  if (a.count > 1) a.step = (values.rbegin()->first - a.start) / (a.count - 1);
  return a;
}

}  // namespace

std::string grid_csv(const KpGrid& grid) {
  std::string out = "x,y,t,re_u,im_u\n";
  const GridSpec& s = grid.spec;
  for (int k = 0; k < s.t.count; ++k)
    for (int j = 0; j < s.y.count; ++j)
      for (int i = 0; i < s.x.count; ++i) {
        append_number(out, s.x.at(i));
        out += ',';
        append_number(out, s.y.at(j));
        out += ',';
        append_number(out, s.t.at(k));
        const auto& u = grid.at(i, j, k);
        if (!u) {
          out += ",pole,pole\n";
          continue;
        }
        out += ',';
        append_number(out, u->real());
        out += ',';
        append_number(out, u->imag());
        out += '\n';
      }
  return out;
}

KpGrid parse_grid_csv(std::string_view csv) {
  struct Row {
    double x, y, t;
    std::optional<Complex> u;
  };
  std::vector<Row> rows;
  std::size_t line = 0;
  bool header = false;
  while (!csv.empty()) {
    const std::size_t nl = csv.find('\n');
    std::string_view text = csv.substr(0, nl);
    csv = nl == std::string_view::npos ? std::string_view{} : csv.substr(nl + 1);
    ++line;
    if (!text.empty() && text.back() == '\r') text.remove_suffix(1);
    if (text.empty()) continue;
    if (!header) {
      if (text != "x,y,t,re_u,im_u")
        throw Error(ErrorCode::kParseError, "grid csv: unexpected header");
      header = true;
      continue;
    }
    std::array<std::string_view, 5> f;
    std::size_t n = 0;
    while (true) {
      const std::size_t comma = text.find(',');
      if (n == f.size())
        throw Error(ErrorCode::kParseError,
                    "grid csv line " + std::to_string(line) + ": too many fields");
      f[n++] = text.substr(0, comma);
      if (comma == std::string_view::npos) break;
      text.remove_prefix(comma + 1);
    }
    if (n != f.size())
      throw Error(ErrorCode::kParseError,
                  "grid csv line " + std::to_string(line) + ": expected 5 fields");
    Row r{parse_number(f[0], line), parse_number(f[1], line),
          parse_number(f[2], line), std::nullopt};
    if (f[3] == "pole" || f[4] == "pole") {
      if (f[3] != f[4])
        throw Error(ErrorCode::kParseError,
                    "grid csv line " + std::to_string(line) + ": half pole row");
    } else {
      r.u = Complex(parse_number(f[3], line), parse_number(f[4], line));
    }
    rows.push_back(r);
  }
  if (!header) throw Error(ErrorCode::kParseError, "grid csv: missing header");
  std::map<double, int> xs, ys, ts;
  for (const Row& r : rows) {
    xs.emplace(r.x, 0);
    ys.emplace(r.y, 0);
    ts.emplace(r.t, 0);
  }
  int idx = 0;
  for (auto* m : {&xs, &ys, &ts}) {
    idx = 0;
    for (auto& [v, i] : *m) i = idx++;
  }
  KpGrid grid;
  grid.spec = GridSpec{axis_from(xs), axis_from(ys), axis_from(ts)};
  if (rows.size() != grid.spec.nodes())
    throw Error(ErrorCode::kParseError, "grid csv: rows do not form a rectangle");
  grid.u.resize(rows.size());
  std::vector<bool> seen(rows.size(), false);
  for (const Row& r : rows) {
    const std::size_t at = grid.index(xs[r.x], ys[r.y], ts[r.t]);
    if (seen[at]) throw Error(ErrorCode::kParseError, "grid csv: duplicate node");
    seen[at] = true;
    grid.u[at] = r.u;
  }
  return grid;
}

}  // namespace thetalab
