#pragma once

#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "twophase/twophase.hpp"

namespace tp_test {

// rows[m][d]; NaN marks an absent cell. Models m0.., datasets d0..
inline twophase::PerformanceMatrix make_matrix(const std::vector<std::vector<double>>& rows) {
  std::vector<std::string> models, datasets;
  for (std::size_t m = 0; m < rows.size(); ++m) models.push_back("m" + std::to_string(m));
  for (std::size_t d = 0; d < rows.front().size(); ++d) datasets.push_back("d" + std::to_string(d));
  twophase::PerformanceMatrix matrix(models, datasets);
  for (std::size_t m = 0; m < rows.size(); ++m)
    for (std::size_t d = 0; d < rows[m].size(); ++d)
      if (!std::isnan(rows[m][d])) matrix.set(models[m], datasets[d], rows[m][d]);
  return matrix;
}

inline twophase::ErrorKind error_kind(const std::function<void()>& f) {
  try {
    f();
  } catch (const twophase::Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected twophase::Error";
  return twophase::ErrorKind::parse;
}

inline twophase::TrainingTrace trace(std::string model, std::string dataset, std::vector<double> vals, double final_test,
                                     double epochs = 1.0) {
  return {std::move(model), std::move(dataset), std::move(vals), final_test, 1, epochs};
}

}  // namespace tp_test
