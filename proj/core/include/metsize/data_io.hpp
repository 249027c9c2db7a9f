#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "metsize/model.hpp"
#include "metsize/size_search.hpp"

namespace metsize {

enum class Orientation { SamplesAsRows, SamplesAsColumns };

/// Layout of a pilot CSV file. Columns are referenced by header name, or
/// by zero-based index when the file has no header. In SamplesAsColumns
/// files the same references apply to the first field of each line.
struct PilotFileSchema {
  std::string label_column = "group";
  std::vector<std::string> covariate_columns;
  std::optional<std::string> id_column;  // ignored when loading
  char delimiter = ',';
  bool has_header = true;
  Orientation orientation = Orientation::SamplesAsRows;
};

void validate(const PilotFileSchema& schema);

// key=value lines: label_column, covariate_columns (comma separated),
// id_column, delimiter (a character, or "tab"), has_header, orientation
// (rows|columns). '#' starts a comment.
PilotFileSchema load_schema(const std::filesystem::path& path);

// Labels map to groups 1 and 2 in order of first appearance.
PilotMatrix load_pilot_csv(const std::filesystem::path& path,
                           const PilotFileSchema& schema);

// Writes a pilot matrix in the SamplesAsRows layout of `schema`, using
// labels "1" and "2" and shortest round-trip decimal text.
void write_pilot_csv(const PilotMatrix& pilot,
                     const std::filesystem::path& path,
                     const PilotFileSchema& schema = {});

inline constexpr const char* kCurveCsvHeader = "n,n1,n2,fdr10,fdr50,fdr90";

std::string curve_csv(const std::vector<FdrCurvePoint>& curve);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

void write_result(const SampleSizeResult& result,
                  const std::filesystem::path& json_path,
                  const std::filesystem::path& csv_path);

SampleSizeResult read_result(const std::filesystem::path& json_path);

std::string curve_svg(const SampleSizeResult& result, double target_fdr);

void render_curve_svg(const SampleSizeResult& result, double target_fdr,
                      const std::filesystem::path& path);

std::string sweep_csv(const std::vector<SweepPoint>& sweep);

// One median line with dashed 10/90 band per sample size, FDR against m.
std::string sweep_svg(const std::vector<SweepPoint>& sweep,
                      double target_fdr);

}  // namespace metsize
