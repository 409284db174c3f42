// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dgd/metrics.hpp"

namespace dgd {

struct MetricsRow {
  std::string image_id;
  std::optional<double> ed_r, ed_g, ed_b, ed_avg, psnr_db, ssim;
  std::optional<double> uiqm;
};

struct MetricsReport {
  std::string dataset_id;
  std::string method_id;
  std::vector<MetricsRow> per_image;  // sorted by image_id
  MetricsRow aggregate;               // image_id "MEAN"
};

struct ReportEntry {
  std::string image_id;
  ImageTensor pred;
  std::optional<ImageTensor> ref;
};

inline MetricsRow evaluate_entry(const ReportEntry& e) {
  MetricsRow row;
  row.image_id = e.image_id;
  if (e.ref) {
    const auto ed = euclidean_distance(e.pred, *e.ref);
    row.ed_r = ed.r;
    row.ed_g = ed.g;
    row.ed_b = ed.b;
    row.ed_avg = ed.avg;
    row.psnr_db = psnr(e.pred, *e.ref);
    row.ssim = ssim(e.pred, *e.ref);
  }
  row.uiqm = uiqm(e.pred);
  return row;
}

namespace detail {

template <typename Field>
std::optional<double> column_mean(const std::vector<MetricsRow>& rows, Field field) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : rows)
    if (const auto& v = r.*field) {
      sum += *v;
      ++n;
    }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

inline constexpr std::optional<double> MetricsRow::*kColumns[] = {
    &MetricsRow::ed_r, &MetricsRow::ed_g, &MetricsRow::ed_b, &MetricsRow::ed_avg,
    &MetricsRow::psnr_db, &MetricsRow::ssim, &MetricsRow::uiqm};
inline constexpr const char* kColumnNames[] = {"ed_r", "ed_g", "ed_b", "ed_avg", "psnr_db", "ssim", "uiqm"};

}  // namespace detail

/// Aggregates precomputed rows: sorts by id and appends column means over non-null cells.
inline MetricsReport aggregate_rows(std::vector<MetricsRow> rows, std::string dataset_id = {}, std::string method_id = {}) {
  if (rows.empty()) throw InvalidInput("build_report: empty input list");
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.image_id < b.image_id; });
  MetricsReport report{std::move(dataset_id), std::move(method_id), std::move(rows), {}};
  report.aggregate.image_id = "MEAN";
  for (auto field : detail::kColumns) report.aggregate.*field = detail::column_mean(report.per_image, field);
  return report;
}

/// Entries without a reference get only the UIQM column.
inline MetricsReport build_report(const std::vector<ReportEntry>& entries, std::string dataset_id = {},
                                  std::string method_id = {}) {
  if (entries.empty()) throw InvalidInput("build_report: empty input list");
  std::vector<MetricsRow> rows;
  rows.reserve(entries.size());
  for (const auto& e : entries) rows.push_back(evaluate_entry(e));
  return aggregate_rows(std::move(rows), std::move(dataset_id), std::move(method_id));
}

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.8f", v);
  return buf;
}

inline void write_csv(std::ostream& os, const MetricsReport& report) {
  os << "image_id";
  for (const char* name : detail::kColumnNames) os << ',' << name;
  os << '\n';
  auto emit = [&](const MetricsRow& row) {
    os << row.image_id;
    for (auto field : detail::kColumns) {
      os << ',';
      if (const auto& v = row.*field) os << format_number(*v);
    }
    os << '\n';
  };
  for (const auto& row : report.per_image) emit(row);
  emit(report.aggregate);
}

inline nlohmann::ordered_json to_json(const MetricsRow& row) {
  nlohmann::ordered_json j;
  j["image_id"] = row.image_id;
  for (std::size_t k = 0; k < std::size(detail::kColumns); ++k) {
    const auto& v = row.*detail::kColumns[k];
    j[detail::kColumnNames[k]] = v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  }
  return j;
}

inline nlohmann::ordered_json to_json(const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["dataset_id"] = report.dataset_id;
  j["method_id"] = report.method_id;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : report.per_image) rows.push_back(to_json(r));
  j["per_image"] = std::move(rows);
  j["aggregate"] = to_json(report.aggregate);
  return j;
}

}  // namespace dgd
