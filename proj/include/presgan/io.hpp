#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "presgan/errors.hpp"
#include "presgan/evaluator.hpp"
#include "presgan/mixture.hpp"
#include "presgan/trainer.hpp"

namespace presgan {

// All file writes go through a temp-then-rename so readers never observe a
// partially written artifact.
inline void atomic_write_file(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    fs::path target(path);
    if (target.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(target.parent_path(), ec);
    }
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw io_error("cannot open '" + tmp.string() + "' for writing");
        out << content;
        out.flush();
        if (!out) throw io_error("write failed for '" + tmp.string() + "'");
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw io_error("cannot rename '" + tmp.string() + "' to '" + target.string() + "'");
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    double parsed = std::strtod(buf, nullptr);
    if (parsed == v) {
        for (int prec = 1; prec < 17; ++prec) {
            char shorter[32];
            std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
            if (std::strtod(shorter, nullptr) == v) return shorter;
        }
    }
    return buf;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline void write_dataset_csv(const std::string& path, const Dataset& data) {
    std::ostringstream out;
    out << "x0,x1,label\n";
    for (std::size_t i = 0; i < data.points.rows(); ++i)
        out << format_double(data.points(i, 0)) << ',' << format_double(data.points(i, 1)) << ','
            << data.labels[i] << '\n';
    atomic_write_file(path, out.str());
}

inline Dataset read_dataset_csv(const std::string& path) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line) || line != "x0,x1,label")
        throw io_error("dataset csv '" + path + "': expected header 'x0,x1,label'");
    std::vector<double> xs;
    std::vector<int> labels;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        double v[2];
        for (int j = 0; j < 2; ++j) {
            if (!std::getline(row, cell, ','))
                throw io_error("dataset csv '" + path + "': short row at line " + std::to_string(line_no));
            v[j] = std::strtod(cell.c_str(), nullptr);
        }
        if (!std::getline(row, cell, ','))
            throw io_error("dataset csv '" + path + "': short row at line " + std::to_string(line_no));
        xs.push_back(v[0]);
        xs.push_back(v[1]);
        labels.push_back(std::atoi(cell.c_str()));
    }
    if (labels.empty()) throw io_error("dataset csv '" + path + "': no rows");
    Dataset out;
    out.points = Tensor::from({labels.size(), 2}, std::move(xs));
    out.labels = std::move(labels);
    return out;
}

inline void write_points_csv(const std::string& path, const Tensor& points) {
    if (points.rank() != 2) throw config_error("points csv: expected a matrix");
    std::ostringstream out;
    for (std::size_t j = 0; j < points.cols(); ++j) out << (j ? "," : "") << 'x' << j;
    out << '\n';
    for (std::size_t i = 0; i < points.rows(); ++i) {
        for (std::size_t j = 0; j < points.cols(); ++j)
            out << (j ? "," : "") << format_double(points(i, j));
        out << '\n';
    }
    atomic_write_file(path, out.str());
}

inline void write_epoch_log_csv(const std::string& path, const std::vector<EpochStats>& log) {
    std::ostringstream out;
    out << "epoch,disc_loss,gen_adv_loss,entropy_grad_norm,accept_rate,sigma_min,sigma_max\n";
    for (const EpochStats& e : log)
        out << e.epoch << ',' << format_double(e.disc_loss) << ',' << format_double(e.gen_adv_loss)
            << ',' << format_double(e.entropy_grad_norm) << ',' << format_double(e.accept_rate)
            << ',' << format_double(e.sigma_min) << ',' << format_double(e.sigma_max) << '\n';
    atomic_write_file(path, out.str());
}

inline void write_instance_loglik_csv(const std::string& path, const std::vector<double>& lls) {
    std::ostringstream out;
    out << "instance,loglik\n";
    for (std::size_t i = 0; i < lls.size(); ++i) out << i << ',' << format_double(lls[i]) << '\n';
    atomic_write_file(path, out.str());
}

// ---------------------------------------------------------------------------
// SVG scatter (target vs generated overlay)
// ---------------------------------------------------------------------------

inline void write_scatter_svg(const std::string& path, const Tensor& target, const Tensor& generated) {
    if (target.rank() != 2 || target.cols() < 2 || (generated.size() > 0 && generated.cols() < 2))
        throw config_error("scatter svg: need N x 2 matrices");
    double lo = -1.0, hi = 1.0;
    auto stretch = [&](const Tensor& t) {
        for (std::size_t i = 0; i < t.rows(); ++i)
            for (std::size_t j = 0; j < 2; ++j) {
                lo = std::min(lo, t(i, j));
                hi = std::max(hi, t(i, j));
            }
    };
    stretch(target);
    if (generated.size() > 0) stretch(generated);
    double span = hi - lo;
    lo -= 0.05 * span;
    hi += 0.05 * span;
    const double size = 640.0;
    auto sx = [&](double v) { return (v - lo) / (hi - lo) * size; };
    auto sy = [&](double v) { return size - (v - lo) / (hi - lo) * size; };

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"640\" "
           "viewBox=\"0 0 640 640\">\n"
        << "<rect width=\"640\" height=\"640\" fill=\"white\"/>\n";
    auto emit = [&](const Tensor& pts, const char* color, double r) {
        for (std::size_t i = 0; i < pts.rows(); ++i)
            out << "<circle cx=\"" << sx(pts(i, 0)) << "\" cy=\"" << sy(pts(i, 1)) << "\" r=\"" << r
                << "\" fill=\"" << color << "\" fill-opacity=\"0.45\"/>\n";
    };
    emit(target, "#2e6fba", 1.8);
    if (generated.size() > 0) emit(generated, "#d1495b", 1.8);
    out << "<text x=\"12\" y=\"20\" font-family=\"monospace\" font-size=\"14\" fill=\"#2e6fba\">"
           "target</text>\n";
    if (generated.size() > 0)
        out << "<text x=\"12\" y=\"38\" font-family=\"monospace\" font-size=\"14\" fill=\"#d1495b\">"
               "generated</text>\n";
    out << "</svg>\n";
    atomic_write_file(path, out.str());
}

// ---------------------------------------------------------------------------
// EvalReport / metrics JSON
// ---------------------------------------------------------------------------

inline void write_eval_report_json(const std::string& path, const EvalReport& report) {
    nlohmann::json j;
    j["mean_loglik"] = report.mean_loglik;
    j["num_importance_samples"] = report.num_importance_samples;
    j["modes_captured"] = report.modes_captured;
    j["label_kl_gen_vs_real"] = report.label_kl_gen_vs_real;
    j["label_kl_real_vs_gen"] = report.label_kl_real_vs_gen;
    j["instance_loglik"] = report.instance_loglik;
    atomic_write_file(path, j.dump(2) + "\n");
}

}  // namespace presgan
