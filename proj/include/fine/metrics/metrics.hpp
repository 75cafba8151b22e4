#pragma once

#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "fine/core/tensor.hpp"

namespace fine {

// Positive infinity when the images are identical.
template <typename T>
double psnr(const Tensor<T> &x, const Tensor<T> &ref, double max_val = 1.0, const Tensor<float> *mask = nullptr);

struct SsimParams
{
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

// Mean SSIM over valid window positions of a 2D image; 3D volumes are averaged
// over slices along the last axis. With a mask only windows centred inside it count.
template <typename T>
double ssim(const Tensor<T> &x, const Tensor<T> &ref, const SsimParams &params = {},
            const Tensor<float> *mask = nullptr);

// No-reference blur estimate in [0, 1]; larger is blurrier. Constant images score 0.
template <typename T>
double blur_score(const Tensor<T> &image);

// Mean blur score over slices along the last axis of a volume (2D images pass through).
template <typename T>
double blur_score_volume(const Tensor<T> &image);

struct LesionStat
{
  std::string label;
  double mean = 0.0;
  double std = 0.0;
};

template <typename T>
LesionStat region_stats(const Tensor<T> &image, const Tensor<float> &mask, const std::string &label);

struct Regression
{
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double slope_stderr = 0.0;
};

// Ordinary least squares b = slope * a + intercept.
Regression lesion_regression(const std::vector<double> &a, const std::vector<double> &b);

struct MetricReport
{
  std::string case_id;
  std::string method_id;
  double psnr_db = 0.0;
  double ssim = 0.0;
  double blur = 0.0;
  std::vector<LesionStat> lesion_stats;
};

// One row per report: case_id,method,psnr_db,ssim,blur,lesions where lesions is
// a ';'-joined list of label:mean:std.
void write_metric_reports(const std::vector<MetricReport> &reports, const std::filesystem::path &path);
std::string metric_csv_header();
std::string metric_csv_row(const MetricReport &r);
std::string format_number(double v);

} // namespace fine
