#pragma once

#include <span>
#include <vector>

namespace densctl::stats {

double mean(std::span<const double> v);
double median(std::vector<double> v);
/// Average ranks (1-based), ties share the mean rank.
std::vector<double> ranks(std::span<const double> v);
double pearson(std::span<const double> a, std::span<const double> b);
/// Pearson correlation of the average ranks.
double spearman(std::span<const double> a, std::span<const double> b);
/// Standard error of a Bernoulli proportion estimate.
double proportion_stderr(double p, double trials);

}  // namespace densctl::stats
