#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "ga.hpp"

namespace evoprune {

inline constexpr std::string_view curves_header =
    "generation,elite_f,elite_e,elite_c,elite_s,mean_f";

struct CurvePoint {
  std::size_t generation = 0;
  double fitness = 0.0;
  double error = 0.0;
  double computation = 0.0;
  double sparsity = 0.0;
  double mean_fitness = 0.0;
  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

CurvePoint to_curve_point(const GenerationRecord& record);

// One line, no newline: values with 6 fractional digits.
std::string format_curve_row(const CurvePoint& point);

// Appends rows to a curves CSV, writing the header on open.
class CurvesWriter {
 public:
  explicit CurvesWriter(const std::filesystem::path& path);

  void append(const CurvePoint& point);

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

// Throws parse errors naming the offending line; header-only input is an
// error.
std::vector<CurvePoint> parse_curves(std::string_view text);
std::vector<CurvePoint> read_curves(const std::filesystem::path& path);

// Four elite curves (fitness, error, sparsity, FLOPs) against generation.
std::string render_curves_svg(const std::vector<CurvePoint>& points, const std::string& title);
void write_curves_svg(const std::filesystem::path& csv, const std::filesystem::path& svg,
                      const std::string& title);

struct SummaryRow {
  FitnessWeights weights;
  double error = 0.0;
  double computation = 0.0;
  double sparsity = 0.0;
  double accuracy_change = 0.0;  // baseline error - final error
};

inline constexpr std::string_view summary_header =
    "lambda1,lambda2,lambda3,error,computation,sparsity,accuracy_change";

std::string format_summary_row(const SummaryRow& row);
void write_summary(const std::filesystem::path& path, const SummaryRow& row);

}  // namespace evoprune
