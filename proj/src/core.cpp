#include "opeflow/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ope {

Vec4 operator+(const Vec4& a, const Vec4& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]};
}

Vec4 operator-(const Vec4& a, const Vec4& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]};
}

Vec4 operator*(double s, const Vec4& a) { return {s * a[0], s * a[1], s * a[2], s * a[3]}; }

double dot(const Vec4& a, const Vec4& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3];
}

double norm(const Vec4& a) { return std::sqrt(dot(a, a)); }

namespace {

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a) {
    throw std::overflow_error("multi-index weight overflows 64 bits");
  }
  return a * b;
}

std::uint64_t factorial(int n) {
  std::uint64_t f = 1;
  for (int k = 2; k <= n; ++k) f = checked_mul(f, static_cast<std::uint64_t>(k));
  return f;
}

std::uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t b = 1;
  for (int i = 1; i <= k; ++i) {
    // exact: b * (n - k + i) is divisible by i at every step
    b = checked_mul(b, static_cast<std::uint64_t>(n - k + i)) / static_cast<std::uint64_t>(i);
  }
  return b;
}

}  // namespace

std::uint64_t MultiIndex::factorial() const {
  std::uint64_t f = 1;
  for (int v : c) f = checked_mul(f, ope::factorial(v));
  return f;
}

bool MultiIndex::leq(const MultiIndex& other) const {
  for (int mu = 0; mu < kSpacetimeDim; ++mu) {
    if (c[mu] > other.c[mu]) return false;
  }
  return true;
}

MultiIndex operator+(const MultiIndex& a, const MultiIndex& b) {
  return {a.c[0] + b.c[0], a.c[1] + b.c[1], a.c[2] + b.c[2], a.c[3] + b.c[3]};
}

MultiIndex operator-(const MultiIndex& a, const MultiIndex& b) {
  return {a.c[0] - b.c[0], a.c[1] - b.c[1], a.c[2] - b.c[2], a.c[3] - b.c[3]};
}

std::strong_ordering operator<=>(const MultiIndex& a, const MultiIndex& b) {
  if (auto o = a.order() <=> b.order(); o != 0) return o;
  // more derivatives along a lower direction sorts first
  for (int mu = 0; mu < kSpacetimeDim; ++mu) {
    if (a.c[mu] != b.c[mu]) return b.c[mu] <=> a.c[mu];
  }
  return std::strong_ordering::equal;
}

std::uint64_t multinomial_weight(std::span<const MultiIndex> parts) {
  std::uint64_t w = 1;
  for (int mu = 0; mu < kSpacetimeDim; ++mu) {
    int running = 0;
    for (const auto& v : parts) {
      running += v.c[mu];
      w = checked_mul(w, binomial(running, v.c[mu]));
    }
  }
  return w;
}

CompositeOp::CompositeOp(std::vector<MultiIndex> factors) : factors_(std::move(factors)) {
  for (const auto& w : factors_) {
    for (int v : w.c) {
      if (v < 0) throw std::invalid_argument("negative multi-index component");
    }
  }
  std::sort(factors_.begin(), factors_.end());
}

CompositeOp CompositeOp::phi_power(int n) {
  return CompositeOp(std::vector<MultiIndex>(static_cast<std::size_t>(n), MultiIndex{}));
}

int CompositeOp::derivative_count() const {
  int d = 0;
  for (const auto& w : factors_) d += w.order();
  return d;
}

std::strong_ordering operator<=>(const CompositeOp& a, const CompositeOp& b) {
  return std::lexicographical_compare_three_way(a.factors_.begin(), a.factors_.end(),
                                                b.factors_.begin(), b.factors_.end());
}

bool basis_less(const CompositeOp& a, const CompositeOp& b) {
  if (a.dimension() != b.dimension()) return a.dimension() < b.dimension();
  return a < b;
}

namespace {

std::vector<MultiIndex> multi_indices_up_to(int max_order) {
  std::vector<MultiIndex> out;
  for (int a = 0; a <= max_order; ++a)
    for (int b = 0; a + b <= max_order; ++b)
      for (int d = 0; a + b + d <= max_order; ++d)
        for (int e = 0; a + b + d + e <= max_order; ++e) out.emplace_back(a, b, d, e);
  std::sort(out.begin(), out.end());
  return out;
}

void extend(const std::vector<MultiIndex>& alphabet, std::size_t from, int budget,
            std::vector<MultiIndex>& current, std::vector<CompositeOp>& out) {
  out.emplace_back(current);
  for (std::size_t i = from; i < alphabet.size(); ++i) {
    const int cost = 1 + alphabet[i].order();
    if (cost > budget) continue;
    current.push_back(alphabet[i]);
    extend(alphabet, i, budget - cost, current, out);
    current.pop_back();
  }
}

}  // namespace

std::vector<CompositeOp> enumerate_operators(int max_dim) {
  std::vector<CompositeOp> out;
  if (max_dim < 0) return out;
  const auto alphabet = multi_indices_up_to(std::max(0, max_dim - 1));
  std::vector<MultiIndex> current;
  extend(alphabet, 0, max_dim, current, out);
  std::sort(out.begin(), out.end(), basis_less);
  return out;
}

std::vector<CompositeOp> enumerate_basis(int max_dim) {
  auto all = enumerate_operators(max_dim);
  std::erase_if(all, [](const CompositeOp& op) { return !op.is_even(); });
  return all;
}

ParseError::ParseError(const std::string& msg, int line, int column)
    : std::runtime_error(std::to_string(line) + ":" + std::to_string(column) + ": " + msg),
      line_(line),
      column_(column) {}

CompositeOp parse_operator(std::string_view text, int line) {
  std::size_t pos = 0;
  auto col = [&] { return static_cast<int>(pos) + 1; };
  auto skip_ws = [&] {
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
  };
  auto read_int = [&]() -> int {
    const std::size_t start = pos;
    int v = 0;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
      v = v * 10 + (text[pos] - '0');
      if (v > 1000) throw ParseError("integer too large", line, static_cast<int>(start) + 1);
      ++pos;
    }
    if (pos == start) throw ParseError("expected integer", line, col());
    return v;
  };

  skip_ws();
  if (pos < text.size() && text[pos] == '1') {
    ++pos;
    skip_ws();
    if (pos != text.size()) throw ParseError("unexpected input after identity '1'", line, col());
    return CompositeOp::identity();
  }

  std::vector<MultiIndex> factors;
  while (true) {
    skip_ws();
    MultiIndex w;
    while (pos < text.size() && text[pos] == 'd') {
      ++pos;
      const int start = col();
      const int mu = read_int();
      if (mu < 1 || mu > kSpacetimeDim) throw ParseError("derivative direction must be 1..4", line, start);
      w.c[static_cast<std::size_t>(mu - 1)] += 1;
    }
    if (text.substr(pos, 3) != "phi") throw ParseError("expected 'phi'", line, col());
    pos += 3;
    int power = 1;
    skip_ws();
    if (pos < text.size() && text[pos] == '^') {
      ++pos;
      skip_ws();
      const int start = col();
      power = read_int();
      if (power < 1) throw ParseError("power must be positive", line, start);
    }
    for (int k = 0; k < power; ++k) factors.push_back(w);
    skip_ws();
    if (pos == text.size()) break;
    if (text[pos] != '*') throw ParseError("expected '*' or end of operator", line, col());
    ++pos;
  }
  return CompositeOp(std::move(factors));
}

std::string format_multi_index(const MultiIndex& w) {
  std::string s;
  for (int mu = 0; mu < kSpacetimeDim; ++mu) {
    for (int k = 0; k < w[mu]; ++k) s += "d" + std::to_string(mu + 1);
  }
  return s;
}

std::string format_operator(const CompositeOp& op) {
  if (op.is_identity()) return "1";
  std::string s;
  const auto& f = op.factors();
  for (std::size_t i = 0; i < f.size();) {
    std::size_t j = i;
    while (j < f.size() && f[j] == f[i]) ++j;
    if (!s.empty()) s += "*";
    s += format_multi_index(f[i]) + "phi";
    if (j - i > 1) s += "^" + std::to_string(j - i);
    i = j;
  }
  return s;
}

double min_pairwise_distance(std::span<const Vec4> pts) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) best = std::min(best, norm(pts[i] - pts[j]));
  return best;
}

double configuration_diameter(std::span<const Vec4> pts) {
  double best = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) best = std::max(best, norm(pts[i] - pts[j]));
  return best;
}

namespace {
std::size_t last_index(const std::vector<Vec4>& pts) { return pts.empty() ? 0 : pts.size() - 1; }
}  // namespace

PointConfig::PointConfig(std::vector<Vec4> points) : PointConfig(points, last_index(points)) {}

PointConfig::PointConfig(std::vector<Vec4> points, std::size_t base)
    : points_(std::move(points)), base_(base) {
  if (points_.empty()) throw std::invalid_argument("point configuration is empty");
  if (base_ >= points_.size()) throw std::invalid_argument("base index out of range");
  for (const auto& p : points_) {
    for (double v : p) {
      if (!std::isfinite(v)) throw std::invalid_argument("non-finite coordinate");
    }
  }
  if (!(min_pairwise_distance(points_) > 0.0)) {
    throw std::invalid_argument("points must be pairwise distinct");
  }
}

double PointConfig::min_distance() const { return min_pairwise_distance(points_); }

double PointConfig::diameter() const { return configuration_diameter(points_); }

PointConfig PointConfig::translated(const Vec4& shift) const {
  auto pts = points_;
  for (auto& p : pts) p = p + shift;
  return PointConfig(std::move(pts), base_);
}

PointConfig PointConfig::scaled(double lambda) const {
  auto pts = points_;
  for (auto& p : pts) p = lambda * p;
  return PointConfig(std::move(pts), base_);
}

}  // namespace ope
