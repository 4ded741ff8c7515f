#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "florist/costmodel.hpp"
#include "florist/fedsim.hpp"

namespace florist {

class io_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Fixed-precision float formatting so CSV output is byte-stable.
std::string format_double(double v);

void write_text_file(const std::filesystem::path& path, const std::string& text);

std::string rounds_csv(const std::vector<RoundLog>& rounds);
std::string rounds_json(const std::vector<RoundLog>& rounds);
std::string sweep_csv(const std::vector<SweepRow>& rows);
std::string rank_report_csv(const RankReport& report, const ModelConfig& model);
std::string spectra_csv(const RankReport& report, const ModelConfig& model);

struct CostRow {
    Method method;
    std::size_t clients;
    CostReport report;
    std::size_t bytes_per_param;
};
std::string cost_csv(const std::vector<CostRow>& rows);

struct CompareRow {
    std::string cohort;  // "homogeneous" | "heterogeneous"
    Method method;
    double final_loss;
    std::size_t total_rank;
    std::size_t download_params;
    double server_flops;
};
std::string compare_csv(const std::vector<CompareRow>& rows);

}  // namespace florist
