#pragma once

// COD evaluation metrics over a continuous prediction in [0,1] against a
// binary ground truth: MAE, max/weighted F-measure, S-measure, max/adaptive
// E-measure. Formulas follow the cited originals; E normalizes by W*H so a
// perfect prediction scores exactly 1.

#include <string>
#include <vector>

namespace camo {

struct MetricsReport {
    double mae = 0;  // M
    double fx = 0;   // max F-measure (beta^2 = 0.3, 256 thresholds)
    double fw = 0;   // weighted F-measure
    double sm = 0;   // structure measure (alpha = 0.5)
    double ex = 0;   // max E-measure
    double ae = 0;   // adaptive E-measure (threshold 2*mean)
};

double metric_mae(const std::vector<float>& pred, const std::vector<float>& gt);
std::pair<double, double> metric_f_measures(const std::vector<float>& pred, const std::vector<float>& gt,
                                            int h, int w);
double metric_s_measure(const std::vector<float>& pred, const std::vector<float>& gt, int h, int w,
                        double alpha = 0.5);
std::pair<double, double> metric_e_measures(const std::vector<float>& pred, const std::vector<float>& gt,
                                            int h, int w);

MetricsReport evaluate_one(const std::vector<float>& pred, const std::vector<float>& gt, int h, int w);
MetricsReport evaluate_report(const std::vector<std::vector<float>>& preds,
                              const std::vector<std::vector<float>>& gts, int h, int w);

}  // namespace camo
