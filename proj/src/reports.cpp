#include "florist/reports.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace florist {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open for writing: " + path.string());
    out << text;
    if (!out) throw io_error("write failure: " + path.string());
}

std::string rounds_csv(const std::vector<RoundLog>& rounds) {
    std::ostringstream out;
    out << "round,total_rank,recon_error,holdout_loss,upload_params,download_params,"
           "server_flops,seed\n";
    for (const auto& r : rounds) {
        std::size_t total_rank = 0;
        for (std::size_t p : r.per_entry_rank) total_rank += p;
        out << r.round << ',' << total_rank << ',' << format_double(r.recon_error) << ','
            << format_double(r.holdout_loss) << ',' << r.cost.upload_params << ','
            << r.cost.download_params << ',' << format_double(r.cost.server_flops) << ','
            << r.seed << '\n';
    }
    return out.str();
}

std::string rounds_json(const std::vector<RoundLog>& rounds) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rounds) {
        arr.push_back({{"round", r.round},
                       {"per_entry_rank", r.per_entry_rank},
                       {"recon_error", r.recon_error},
                       {"holdout_loss", r.holdout_loss},
                       {"upload_params", r.cost.upload_params},
                       {"download_params", r.cost.download_params},
                       {"measured_upload_params", r.measured_upload_params},
                       {"measured_download_params", r.measured_download_params},
                       {"server_flops", r.cost.server_flops},
                       {"seed", r.seed}});
    }
    return arr.dump(2) + "\n";
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream out;
    out << "tau,total_rank,recon_error_rel,holdout_loss,download_params,efficiency\n";
    for (const auto& r : rows) {
        out << format_double(r.tau) << ',' << r.total_rank << ','
            << format_double(r.recon_error) << ',' << format_double(r.holdout_loss) << ','
            << r.download_params << ',' << format_double(r.efficiency) << '\n';
    }
    return out.str();
}

std::string rank_report_csv(const RankReport& report, const ModelConfig& model) {
    std::ostringstream out;
    out << "layer,projection,rank,energy_retained\n";
    for (const auto& r : report.rows) {
        out << r.layer << ',' << model.projections[r.projection] << ',' << r.rank << ','
            << format_double(r.energy_retained) << '\n';
    }
    return out.str();
}

std::string spectra_csv(const RankReport& report, const ModelConfig& model) {
    std::ostringstream out;
    out << "layer,projection,index,singular_value\n";
    for (std::size_t l = 0; l < model.layers; ++l) {
        for (std::size_t p = 0; p < model.projections.size(); ++p) {
            const auto& spectrum = report.spectra[model.entry_index(l, p)];
            for (std::size_t i = 0; i < spectrum.size(); ++i)
                out << l << ',' << model.projections[p] << ',' << i << ','
                    << format_double(spectrum[i]) << '\n';
        }
    }
    return out.str();
}

std::string cost_csv(const std::vector<CostRow>& rows) {
    std::ostringstream out;
    out << "method,K,upload_params,download_params,upload_MB,download_MB,server_flops,"
           "total_rank,efficiency\n";
    for (const auto& r : rows) {
        out << method_name(r.method) << ',' << r.clients << ',' << r.report.upload_params << ','
            << r.report.download_params << ','
            << format_double(r.report.upload_mb(r.bytes_per_param)) << ','
            << format_double(r.report.download_mb(r.bytes_per_param)) << ','
            << format_double(r.report.server_flops) << ',' << r.report.total_rank << ','
            << format_double(r.report.efficiency) << '\n';
    }
    return out.str();
}

std::string compare_csv(const std::vector<CompareRow>& rows) {
    std::ostringstream out;
    out << "cohort,method,final_holdout_loss,total_rank,download_params,server_flops\n";
    for (const auto& r : rows) {
        out << r.cohort << ',' << method_name(r.method) << ',' << format_double(r.final_loss)
            << ',' << r.total_rank << ',' << r.download_params << ','
            << format_double(r.server_flops) << '\n';
    }
    return out.str();
}

}  // namespace florist
