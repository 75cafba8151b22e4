#include "fine/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace fine {

namespace {

// Splits a 2D or 3D tensor into 2D slices along its last axis.
struct SliceView
{
  std::size_t rows = 0, cols = 0, slices = 0;

  explicit SliceView(const Shape &s, const char *where)
  {
    if (s.size() == 2) {
      rows = s[0];
      cols = s[1];
      slices = 1;
    } else if (s.size() == 3) {
      rows = s[0];
      cols = s[1];
      slices = s[2];
    } else {
      throw ShapeError(std::string(where) + ": expected a 2D or 3D image");
    }
  }
  std::size_t index(std::size_t r, std::size_t c, std::size_t k) const { return (r * cols + c) * slices + k; }
};

template <typename T>
std::vector<double> slice_of(const Tensor<T> &t, const SliceView &v, std::size_t k)
{
  std::vector<double> out(v.rows * v.cols);
  for (std::size_t r = 0; r < v.rows; ++r) {
    for (std::size_t c = 0; c < v.cols; ++c) {
      out[r * v.cols + c] = static_cast<double>(t[v.index(r, c, k)]);
    }
  }
  return out;
}

std::vector<double> gaussian_window(std::size_t n, double sigma)
{
  std::vector<double> w(n);
  const double c = 0.5 * static_cast<double>(n - 1);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(i) - c;
    w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    s += w[i];
  }
  for (auto &v : w) {
    v /= s;
  }
  return w;
}

// Sums SSIM over valid window positions of one slice; returns (sum, count).
std::pair<double, std::size_t> ssim_slice(const std::vector<double> &x, const std::vector<double> &y,
                                          const std::vector<double> *mask, std::size_t rows, std::size_t cols,
                                          const SsimParams &p, const std::vector<double> &w)
{
  const std::size_t n = p.window;
  const double c1 = std::pow(p.k1 * p.dynamic_range, 2), c2 = std::pow(p.k2 * p.dynamic_range, 2);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r + n <= rows; ++r) {
    for (std::size_t c = 0; c + n <= cols; ++c) {
      if (mask && (*mask)[(r + n / 2) * cols + c + n / 2] == 0.0) {
        continue;
      }
      double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          const double wt = w[i] * w[j];
          const double a = x[(r + i) * cols + c + j], b = y[(r + i) * cols + c + j];
          mx += wt * a;
          my += wt * b;
          xx += wt * a * a;
          yy += wt * b * b;
          xy += wt * a * b;
        }
      }
      const double sx = xx - mx * mx, sy = yy - my * my, sxy = xy - mx * my;
      sum += ((2.0 * mx * my + c1) * (2.0 * sxy + c2)) / ((mx * mx + my * my + c1) * (sx + sy + c2));
      ++count;
    }
  }
  return {sum, count};
}

// Length-9 mean filter along one axis with replicated borders.
std::vector<double> mean_filter(const std::vector<double> &f, std::size_t rows, std::size_t cols, bool vertical)
{
  std::vector<double> out(f.size());
  const long half = 4;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      double s = 0.0;
      for (long d = -half; d <= half; ++d) {
        if (vertical) {
          const long rr = std::clamp(static_cast<long>(r) + d, 0L, static_cast<long>(rows) - 1);
          s += f[static_cast<std::size_t>(rr) * cols + c];
        } else {
          const long cc = std::clamp(static_cast<long>(c) + d, 0L, static_cast<long>(cols) - 1);
          s += f[r * cols + static_cast<std::size_t>(cc)];
        }
      }
      out[r * cols + c] = s / static_cast<double>(2 * half + 1);
    }
  }
  return out;
}

double blur_2d(const std::vector<double> &f, std::size_t rows, std::size_t cols)
{
  double best = 0.0;
  for (bool vertical : {true, false}) {
    const auto b = mean_filter(f, rows, cols, vertical);
    double s_f = 0.0, s_v = 0.0;
    for (std::size_t r = 1; r < rows; ++r) {
      for (std::size_t c = 1; c < cols; ++c) {
        const std::size_t i = r * cols + c;
        const std::size_t prev = vertical ? i - cols : i - 1;
        const double df = std::abs(f[i] - f[prev]);
        const double db = std::abs(b[i] - b[prev]);
        s_f += df;
        s_v += std::max(0.0, df - db);
      }
    }
    if (s_f > 0.0) {
      best = std::max(best, (s_f - s_v) / s_f);
    }
  }
  return best;
}

} // namespace

template <typename T>
double psnr(const Tensor<T> &x, const Tensor<T> &ref, double max_val, const Tensor<float> *mask)
{
  require_same_shape(x.shape(), ref.shape(), "psnr");
  if (!(max_val > 0.0)) {
    throw ConfigError("psnr: max_val must be positive");
  }
  if (mask) {
    require_same_shape(mask->shape(), x.shape(), "psnr mask");
  }
  double se = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (mask && (*mask)[i] == 0.0f) {
      continue;
    }
    const double d = static_cast<double>(x[i]) - static_cast<double>(ref[i]);
    se += d * d;
    ++n;
  }
  if (n == 0) {
    throw ShapeError("psnr: empty mask");
  }
  if (se == 0.0) {
    return std::numeric_limits<double>::infinity();
  }
  return 10.0 * std::log10(max_val * max_val / (se / static_cast<double>(n)));
}

template <typename T>
double ssim(const Tensor<T> &x, const Tensor<T> &ref, const SsimParams &params, const Tensor<float> *mask)
{
  require_same_shape(x.shape(), ref.shape(), "ssim");
  const SliceView v(x.shape(), "ssim");
  if (v.rows < params.window || v.cols < params.window) {
    throw ShapeError("ssim: image smaller than the " + std::to_string(params.window) + "-pixel window");
  }
  if (mask) {
    require_same_shape(mask->shape(), x.shape(), "ssim mask");
  }
  const auto w = gaussian_window(params.window, params.sigma);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < v.slices; ++k) {
    std::vector<double> m;
    if (mask) {
      m = slice_of(*mask, v, k);
    }
    const auto [s, n] =
        ssim_slice(slice_of(x, v, k), slice_of(ref, v, k), mask ? &m : nullptr, v.rows, v.cols, params, w);
    sum += s;
    count += n;
  }
  if (count == 0) {
    throw ShapeError("ssim: no window centre lies inside the mask");
  }
  return sum / static_cast<double>(count);
}

template <typename T>
double blur_score(const Tensor<T> &image)
{
  if (image.rank() != 2) {
    throw ShapeError("blur_score: expected a 2D image");
  }
  const std::size_t rows = image.extent(0), cols = image.extent(1);
  if (rows < 2 || cols < 2) {
    throw ShapeError("blur_score: image must be at least 2x2");
  }
  std::vector<double> f(image.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    f[i] = static_cast<double>(image[i]);
  }
  return blur_2d(f, rows, cols);
}

template <typename T>
double blur_score_volume(const Tensor<T> &image)
{
  if (image.rank() == 2) {
    return blur_score(image);
  }
  const SliceView v(image.shape(), "blur_score_volume");
  if (v.rows < 2 || v.cols < 2) {
    throw ShapeError("blur_score_volume: slices must be at least 2x2");
  }
  double s = 0.0;
  for (std::size_t k = 0; k < v.slices; ++k) {
    s += blur_2d(slice_of(image, v, k), v.rows, v.cols);
  }
  return s / static_cast<double>(v.slices);
}

template <typename T>
LesionStat region_stats(const Tensor<T> &image, const Tensor<float> &mask, const std::string &label)
{
  require_same_shape(image.shape(), mask.shape(), "region_stats");
  double s = 0.0, ss = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < image.size(); ++i) {
    if (mask[i] != 0.0f) {
      const double v = static_cast<double>(image[i]);
      s += v;
      ss += v * v;
      ++n;
    }
  }
  if (n == 0) {
    throw ShapeError("region_stats: empty region '" + label + "'");
  }
  const double mean = s / static_cast<double>(n);
  return {label, mean, std::sqrt(std::max(0.0, ss / static_cast<double>(n) - mean * mean))};
}

Regression lesion_regression(const std::vector<double> &a, const std::vector<double> &b)
{
  if (a.size() != b.size() || a.size() < 2) {
    throw ShapeError("lesion_regression: need two equal-length lists of at least 2 values");
  }
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double saa = 0, sab = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    saa += (a[i] - ma) * (a[i] - ma);
    sab += (a[i] - ma) * (b[i] - mb);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0) {
    throw NumericalError("lesion_regression: zero variance in the reference values");
  }
  Regression r;
  r.slope = sab / saa;
  r.intercept = mb - r.slope * ma;
  double sse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double e = b[i] - (r.slope * a[i] + r.intercept);
    sse += e * e;
  }
  r.r2 = sbb == 0.0 ? 1.0 : 1.0 - sse / sbb;
  r.slope_stderr = a.size() > 2 ? std::sqrt(sse / (n - 2.0) / saa) : 0.0;
  return r;
}

std::string format_number(double v)
{
  if (std::isinf(v)) {
    return v > 0 ? "inf" : "-inf";
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string metric_csv_header()
{
  return "case_id,method,psnr_db,ssim,blur,lesions";
}

std::string metric_csv_row(const MetricReport &r)
{
  std::string lesions;
  for (std::size_t i = 0; i < r.lesion_stats.size(); ++i) {
    const auto &s = r.lesion_stats[i];
    lesions += (i ? ";" : "") + s.label + ":" + format_number(s.mean) + ":" + format_number(s.std);
  }
  return r.case_id + "," + r.method_id + "," + format_number(r.psnr_db) + "," + format_number(r.ssim) + "," +
         format_number(r.blur) + "," + lesions;
}

void write_metric_reports(const std::vector<MetricReport> &reports, const std::filesystem::path &path)
{
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write metrics " + path.string());
  }
  out << metric_csv_header() << '\n';
  for (const auto &r : reports) {
    out << metric_csv_row(r) << '\n';
  }
}

#define FINE_METRICS(T)                                                                                             \
  template double psnr<T>(const Tensor<T> &, const Tensor<T> &, double, const Tensor<float> *);                      \
  template double ssim<T>(const Tensor<T> &, const Tensor<T> &, const SsimParams &, const Tensor<float> *);          \
  template double blur_score<T>(const Tensor<T> &);                                                                 \
  template double blur_score_volume<T>(const Tensor<T> &);                                                          \
  template LesionStat region_stats<T>(const Tensor<T> &, const Tensor<float> &, const std::string &);
FINE_METRICS(float)
FINE_METRICS(double)
#undef FINE_METRICS

} // namespace fine
