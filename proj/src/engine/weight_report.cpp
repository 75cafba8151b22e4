#include "fine/engine/weight_report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace fine {

template <typename T>
WeightChangeReport weight_change_report(const NetworkParams<T> &before, const NetworkParams<T> &after, double delta)
{
  check_same_architecture(before, after);
  WeightChangeReport r;
  for (std::size_t l = 0; l < before.layers.size(); ++l) {
    const Tensor<T> &w0 = before.layers[l].weight;
    const Tensor<T> &w1 = after.layers[l].weight;
    std::vector<double> rel(w0.size());
    LayerChange c;
    c.layer_id = before.layers[l].id;
    for (std::size_t i = 0; i < w0.size(); ++i) {
      const double a = w0[i], b = w1[i];
      rel[i] = std::abs(b - a) / (std::abs(a) + delta);
      c.norm_before += a * a;
      c.norm_after += b * b;
      c.change_norm += (b - a) * (b - a);
    }
    const std::size_t mid = rel.size() / 2;
    std::nth_element(rel.begin(), rel.begin() + static_cast<std::ptrdiff_t>(mid), rel.end());
    double med = rel[mid];
    if (rel.size() % 2 == 0) {
      med = 0.5 * (med + *std::max_element(rel.begin(), rel.begin() + static_cast<std::ptrdiff_t>(mid)));
    }
    c.median_rel_change = med;
    c.norm_before = std::sqrt(c.norm_before);
    c.norm_after = std::sqrt(c.norm_after);
    c.change_norm = std::sqrt(c.change_norm);
    r.layers.push_back(c);
  }
  return r;
}

void write_weight_report(const WeightChangeReport &r, const std::filesystem::path &path)
{
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write weight report " + path.string());
  }
  out.precision(10);
  out << "layer_index,layer_id,median_rel_change,norm_before,norm_after,change_norm\n";
  for (std::size_t i = 0; i < r.layers.size(); ++i) {
    const auto &c = r.layers[i];
    out << i << ',' << c.layer_id << ',' << c.median_rel_change << ',' << c.norm_before << ',' << c.norm_after << ','
        << c.change_norm << '\n';
  }
}

template WeightChangeReport weight_change_report<float>(const NetworkParams<float> &, const NetworkParams<float> &,
                                                        double);
template WeightChangeReport weight_change_report<double>(const NetworkParams<double> &, const NetworkParams<double> &,
                                                         double);

} // namespace fine
