#include "prefflow/bench/bench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "prefflow/common/rng.hpp"

namespace prefflow::bench {

using reward::EditCase;
using reward::EditTask;

namespace {

std::string fixed3(double value) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(3);
    out << round_half_up(value, 3);
    return out.str();
}

uint64_t case_seed(uint64_t run_seed, const std::string& id) {
    uint64_t h = run_seed;
    for (char ch : id) h = mix_seed({h, static_cast<uint64_t>(ch)});
    return h;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(field);
    return fields;
}

}  // namespace

BenchSuite BenchSuite::load(const std::filesystem::path& path) {
    const data::RawDataset raw = data::ingest(path);
    if (raw.cases.empty()) throw BenchError("bench suite is empty: " + path.string());
    return from_cases(raw.cases);
}

BenchSuite BenchSuite::from_cases(std::vector<EditCase> cases) {
    BenchSuite suite;
    for (EditCase& c : cases) suite.by_task[c.task].push_back(std::move(c));
    return suite;
}

size_t BenchSuite::total_cases() const {
    size_t total = 0;
    for (const auto& [task, cases] : by_task) total += cases.size();
    return total;
}

void BenchReport::verify_consistency() const {
    if (task_means.empty()) throw BenchError("report has no task means");
    double mean = 0.0;
    for (const auto& [task, value] : task_means) mean += value;
    mean /= static_cast<double>(task_means.size());
    const double tol = rounded ? 1.1e-3 : 1e-9;
    if (std::abs(mean - overall) > tol)
        throw BenchError("report overall " + fmt_double(overall) +
                         " does not match its task means (" + fmt_double(mean) + ")");
}

BenchReport evaluate(const CaseSampler& sampler, const BenchSuite& suite,
                     const reward::Scorer& scorer, const reward::PromptRegistry& prompts,
                     const EvalConfig& cfg) {
    if (suite.by_task.empty()) throw BenchError("evaluate: empty suite");
    for (const auto& [task, cases] : suite.by_task)
        if (cases.empty()) throw BenchError("evaluate: task without cases");

    BenchReport report;
    report.model_id = cfg.model_id;
    report.scorer_id = std::string(scorer.name());
    report.seed = cfg.seed;

    for (const auto& [task, cases] : suite.by_task) {
        const auto prompt_it = prompts.find(task);
        if (prompt_it == prompts.end())
            throw BenchError("evaluate: no prompt for task " +
                             std::string(reward::task_name(task)));
        std::vector<double> scores(cases.size(),
                                   std::numeric_limits<double>::quiet_NaN());
        parallel_for(cases.size(), cfg.threads, [&](size_t i) {
            EditCase copy = cases[i];
            try {
                copy.terminal_point = sampler(copy, case_seed(cfg.seed, copy.id));
                if (copy.output_ref.empty()) copy.output_ref = "generated://" + copy.id;
                scores[i] = scorer.score(copy, prompt_it->second);
            } catch (const std::exception&) {
                // leave NaN: excluded from the mean, counted below
            }
        });
        double acc = 0.0;
        size_t kept = 0;
        for (double s : scores) {
            if (std::isnan(s)) {
                ++report.failures;
            } else {
                acc += s;
                ++kept;
            }
        }
        if (kept == 0)
            throw BenchError("evaluate: every case failed for task " +
                             std::string(reward::task_name(task)));
        report.task_means[task] = acc / static_cast<double>(kept);
        report.task_counts[task] = kept;
    }

    double mean = 0.0;
    for (const auto& [task, value] : report.task_means) mean += value;
    report.overall = mean / static_cast<double>(report.task_means.size());
    report.verify_consistency();
    return report;
}

double aggregate_overall(std::span<const double> task_means) {
    if (task_means.size() != 8)
        throw BenchError("aggregate_overall expects 8 task means, got " +
                         std::to_string(task_means.size()));
    double acc = 0.0;
    for (double value : task_means) acc += value;
    return acc / 8.0;
}

double pearson_correlation(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        throw BenchError("pearson: length mismatch (" + std::to_string(x.size()) + " vs " +
                         std::to_string(y.size()) + ")");
    if (x.size() < 2) throw BenchError("pearson: need at least 2 points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw BenchError("pearson: zero variance input");
    return sxy / (std::sqrt(sxx) * std::sqrt(syy));
}

void write_report_csv(const std::filesystem::path& path, std::span<const BenchReport> reports) {
    std::vector<std::string> header{"model"};
    for (EditTask task : reward::kAllTasks)
        header.push_back(std::string(reward::task_report_label(task)));
    header.push_back("overall");
    header.push_back("failures");
    CsvWriter csv(path, header);
    for (const BenchReport& report : reports) {
        report.verify_consistency();
        std::vector<std::string> row{report.model_id};
        for (EditTask task : reward::kAllTasks) {
            const auto it = report.task_means.find(task);
            row.push_back(it == report.task_means.end() ? "" : fixed3(it->second));
        }
        row.push_back(fixed3(report.overall));
        row.push_back(std::to_string(report.failures));
        csv.row(row);
    }
    csv.flush();
}

std::vector<BenchReport> read_report_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw BenchError("cannot open report: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw BenchError("empty report: " + path.string());
    const auto header = split_csv_line(line);
    if (header.size() != 11 || header.front() != "model" || header.back() != "failures")
        throw BenchError("unexpected report header in " + path.string());

    std::vector<BenchReport> reports;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw BenchError("short report row in " + path.string());
        BenchReport report;
        report.model_id = fields[0];
        size_t col = 1;
        for (EditTask task : reward::kAllTasks) {
            if (!fields[col].empty()) report.task_means[task] = std::stod(fields[col]);
            ++col;
        }
        report.overall = std::stod(fields[col++]);
        report.failures = static_cast<size_t>(std::stoul(fields[col]));
        report.rounded = true;
        reports.push_back(std::move(report));
    }
    return reports;
}

void write_report_markdown(const std::filesystem::path& path,
                           std::span<const BenchReport> reports) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> header{"Model"};
    for (EditTask task : reward::kAllTasks)
        header.push_back(std::string(reward::task_display_name(task)));
    header.push_back("Overall");
    rows.push_back(header);
    for (const BenchReport& report : reports) {
        report.verify_consistency();
        std::vector<std::string> row{report.model_id};
        for (EditTask task : reward::kAllTasks) {
            const auto it = report.task_means.find(task);
            row.push_back(it == report.task_means.end() ? "-" : fixed3(it->second));
        }
        row.push_back(fixed3(report.overall));
        rows.push_back(row);
    }

    std::vector<size_t> widths(rows.front().size(), 0);
    for (const auto& row : rows)
        for (size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());

    std::ostringstream out;
    auto emit_row = [&](const std::vector<std::string>& row) {
        out << "|";
        for (size_t c = 0; c < row.size(); ++c)
            out << ' ' << row[c] << std::string(widths[c] - row[c].size(), ' ') << " |";
        out << '\n';
    };
    emit_row(rows.front());
    out << "|";
    for (size_t c = 0; c < widths.size(); ++c) out << std::string(widths[c] + 2, '-') << "|";
    out << '\n';
    for (size_t r = 1; r < rows.size(); ++r) emit_row(rows[r]);
    write_text_file(path, out.str());
}

std::vector<BenchReport> merge_reports(std::vector<BenchReport> reports) {
    std::stable_sort(reports.begin(), reports.end(),
                     [](const BenchReport& a, const BenchReport& b) {
                         return a.overall > b.overall;
                     });
    return reports;
}

}  // namespace prefflow::bench
