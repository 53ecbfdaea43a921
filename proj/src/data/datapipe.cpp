#include "prefflow/data/datapipe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "prefflow/common/rng.hpp"
#include "prefflow/kern/kernels.hpp"

namespace prefflow::data {

using nlohmann::json;
using reward::EditCase;
using reward::EditTask;

namespace {

constexpr double kPerfectScoreTol = 1e-9;

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> known,
                         const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (std::none_of(known.begin(), known.end(),
                         [&](const char* k) { return key == k; }))
            throw DatapipeError(where + ": unknown key '" + key + "'");
    }
}

EditCase parse_case(const json& doc) {
    reject_unknown_keys(doc,
                        {"id", "task", "instruction", "category_hint", "category", "input",
                         "output", "score"},
                        "case");
    EditCase c;
    c.id = doc.at("id").get<std::string>();
    if (c.id.empty()) throw DatapipeError("case: empty id");
    const auto task_str = doc.at("task").get<std::string>();
    const auto task = reward::task_from_name(task_str);
    if (!task) throw DatapipeError("case " + c.id + ": unknown task '" + task_str + "'");
    c.task = *task;
    c.instruction = doc.at("instruction").get<std::string>();
    c.category_hint = doc.value("category_hint", "");
    c.category = doc.value("category", "");

    const json& input = doc.at("input");
    reject_unknown_keys(input, {"embedding", "payload_ref"}, "case " + c.id + " input");
    c.input_embedding = input.at("embedding").get<std::vector<double>>();
    c.input_ref = input.value("payload_ref", "");

    if (doc.contains("output")) {
        const json& output = doc.at("output");
        reject_unknown_keys(output, {"payload_ref", "terminal_point"},
                            "case " + c.id + " output");
        c.output_ref = output.value("payload_ref", "");
        if (output.contains("terminal_point"))
            c.terminal_point = output.at("terminal_point").get<std::vector<double>>();
    }
    if (doc.contains("score")) {
        const double s = doc.at("score").get<double>();
        if (!(s >= 0.0 && s <= 5.0))
            throw DatapipeError("case " + c.id + ": score outside [0,5]");
        c.score = s;
    }
    return c;
}

json case_to_json(const EditCase& c, std::optional<double> score) {
    json doc;
    doc["id"] = c.id;
    doc["task"] = std::string(reward::task_name(c.task));
    doc["instruction"] = c.instruction;
    if (!c.category_hint.empty()) doc["category_hint"] = c.category_hint;
    if (!c.category.empty()) doc["category"] = c.category;
    doc["input"] = {{"embedding", c.input_embedding}, {"payload_ref", c.input_ref}};
    if (c.terminal_point || !c.output_ref.empty()) {
        json output;
        output["payload_ref"] = c.output_ref;
        if (c.terminal_point) output["terminal_point"] = *c.terminal_point;
        doc["output"] = output;
    }
    if (score) doc["score"] = *score;
    return doc;
}

}  // namespace

RawDataset ingest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DatapipeError("cannot open dataset: " + path.string());
    RawDataset dataset;
    dataset.provenance = path.string();
    std::map<std::string, size_t> seen;  // id -> first line
    std::string line;
    size_t line_no = 0;
    std::vector<std::string> problems;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            EditCase c = parse_case(json::parse(line));
            auto [it, inserted] = seen.emplace(c.id, line_no);
            if (!inserted)
                throw DatapipeError("duplicate id '" + c.id + "' (first seen on line " +
                                    std::to_string(it->second) + ")");
            dataset.cases.push_back(std::move(c));
        } catch (const std::exception& e) {
            problems.push_back("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!problems.empty()) {
        std::string msg = path.string() + ": " + std::to_string(problems.size()) +
                          " bad line(s); first: " + problems.front();
        throw DatapipeError(msg);
    }
    return dataset;
}

ScoredDataset score_dataset(const RawDataset& raw, const reward::Scorer& scorer,
                            const reward::PromptRegistry& prompts, unsigned threads) {
    struct Slot {
        double score = 0.0;
        bool failed = false;
        std::string error;
    };
    std::vector<Slot> slots(raw.cases.size());
    parallel_for(raw.cases.size(), threads, [&](size_t i) {
        const EditCase& c = raw.cases[i];
        try {
            const auto it = prompts.find(c.task);
            if (it == prompts.end())
                throw reward::ScorerError(reward::ScoreErrorKind::malformed,
                                          "no prompt registered for task");
            slots[i].score = scorer.score(c, it->second);
            if (!(slots[i].score >= 0.0 && slots[i].score <= 5.0))
                throw reward::ScorerError(reward::ScoreErrorKind::out_of_range,
                                          "score outside [0,5]");
        } catch (const std::exception& e) {
            slots[i].failed = true;
            slots[i].error = e.what();
        }
    });
    ScoredDataset scored;
    for (size_t i = 0; i < raw.cases.size(); ++i) {
        if (slots[i].failed)
            scored.failures.push_back({raw.cases[i].id, slots[i].error});
        else
            scored.entries.push_back({raw.cases[i], slots[i].score});
    }
    return scored;
}

HardCaseDataset filter_hard_cases(const ScoredDataset& scored, std::optional<double> threshold) {
    HardCaseDataset hard;
    for (const ScoredEntry& entry : scored.entries) {
        const bool drop = threshold ? entry.score >= *threshold
                                    : std::abs(entry.score - 5.0) <= kPerfectScoreTol;
        if (drop)
            ++hard.discarded;
        else
            hard.entries.push_back(entry);
    }
    hard.all_perfect = hard.entries.empty() && !scored.entries.empty();
    return hard;
}

void CategoryProfile::validate() const {
    if (names.empty()) throw DatapipeError("category profile: empty");
    if (names.size() != embeddings.size())
        throw DatapipeError("category profile: names/embeddings length mismatch");
    const size_t d = embeddings.front().size();
    for (size_t i = 0; i < embeddings.size(); ++i) {
        if (embeddings[i].size() != d)
            throw DatapipeError("category profile: inconsistent embedding dimensions");
        if (kern::dot(embeddings[i], embeddings[i]) == 0.0)
            throw DatapipeError("category profile: zero-norm embedding for '" + names[i] + "'");
    }
}

CategoryProfile CategoryProfile::load(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(read_text_file(path));
    } catch (const std::exception& e) {
        throw DatapipeError("bad category profile " + path.string() + ": " + e.what());
    }
    CategoryProfile profile;
    try {
        for (const json& entry : doc.at("categories")) {
            profile.names.push_back(entry.at("name").get<std::string>());
            profile.embeddings.push_back(entry.at("embedding").get<std::vector<double>>());
        }
    } catch (const json::exception& e) {
        throw DatapipeError("bad category profile schema in " + path.string() + ": " + e.what());
    }
    profile.validate();
    return profile;
}

void CategoryProfile::save(const std::filesystem::path& path) const {
    validate();
    json entries = json::array();
    for (size_t i = 0; i < names.size(); ++i)
        entries.push_back({{"name", names[i]}, {"embedding", embeddings[i]}});
    write_text_file(path, json{{"categories", entries}}.dump(2) + "\n");
}

CategoryProfile CategoryProfile::synthetic(std::vector<std::string> names, size_t dim,
                                           uint64_t seed) {
    CategoryProfile profile;
    profile.names = std::move(names);
    for (const std::string& name : profile.names) {
        uint64_t h = seed;
        for (char ch : name) h = mix_seed({h, static_cast<uint64_t>(ch)});
        Rng rng(h);
        std::vector<double> e(dim);
        double norm = 0.0;
        for (double& v : e) {
            v = rng.gaussian();
            norm += v * v;
        }
        norm = std::sqrt(norm);
        for (double& v : e) v /= norm;
        profile.embeddings.push_back(std::move(e));
    }
    profile.validate();
    return profile;
}

std::vector<EditCase> assign_categories(std::vector<EditCase> cases,
                                        const CategoryProfile& profile) {
    profile.validate();
    std::vector<double> inv_norms(profile.names.size());
    for (size_t c = 0; c < profile.embeddings.size(); ++c)
        inv_norms[c] = 1.0 / std::sqrt(kern::dot(profile.embeddings[c], profile.embeddings[c]));

    for (EditCase& edit_case : cases) {
        const auto& e = edit_case.input_embedding;
        if (e.size() != profile.embeddings.front().size())
            throw DatapipeError("case " + edit_case.id + ": embedding dimension mismatch");
        const double norm = std::sqrt(kern::dot(e, e));
        if (norm == 0.0)
            throw DatapipeError("case " + edit_case.id + ": zero-norm embedding");
        size_t best = 0;
        double best_sim = -2.0;
        for (size_t c = 0; c < profile.names.size(); ++c) {
            const double sim = kern::dot(e, profile.embeddings[c]) * inv_norms[c] / norm;
            const bool wins = sim > best_sim ||
                              (sim == best_sim && profile.names[c] < profile.names[best]);
            if (wins) {
                best = c;
                best_sim = sim;
            }
        }
        edit_case.category = profile.names[best];
    }
    return cases;
}

std::vector<ScoredEntry> balance_categories(std::vector<ScoredEntry> entries, double cap_ratio) {
    if (!(cap_ratio >= 1.0)) throw DatapipeError("balance: cap_ratio must be >= 1");
    if (std::isinf(cap_ratio) || entries.empty()) return entries;

    std::map<std::string, std::vector<size_t>> by_category;
    for (size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].edit_case.category.empty())
            throw DatapipeError("balance: case " + entries[i].edit_case.id +
                                " has no category label");
        by_category[entries[i].edit_case.category].push_back(i);
    }
    const double per_category = std::ceil(static_cast<double>(entries.size()) /
                                          static_cast<double>(by_category.size()));
    const double cap = cap_ratio * per_category;

    std::vector<bool> dropped(entries.size(), false);
    for (auto& [category, indices] : by_category) {
        if (static_cast<double>(indices.size()) <= cap) continue;
        const size_t keep = static_cast<size_t>(std::floor(cap));
        // Drop priority: highest score first, then ascending id.
        std::sort(indices.begin(), indices.end(), [&](size_t a, size_t b) {
            if (entries[a].score != entries[b].score) return entries[a].score > entries[b].score;
            return entries[a].edit_case.id < entries[b].edit_case.id;
        });
        for (size_t j = 0; j + keep < indices.size(); ++j) dropped[indices[j]] = true;
    }
    std::vector<ScoredEntry> kept;
    kept.reserve(entries.size());
    for (size_t i = 0; i < entries.size(); ++i)
        if (!dropped[i]) kept.push_back(std::move(entries[i]));
    return kept;
}

double TaskStats::ratio_percent(reward::EditTask task) const {
    if (total == 0) throw DatapipeError("stats: empty dataset has no ratios");
    const auto it = counts.find(task);
    const double count = it == counts.end() ? 0.0 : static_cast<double>(it->second);
    return round_half_up(count / static_cast<double>(total) * 100.0, 2);
}

TaskStats dataset_stats(std::span<const ScoredEntry> entries) {
    std::map<EditTask, size_t> counts;
    for (const ScoredEntry& entry : entries) ++counts[entry.edit_case.task];
    return stats_from_counts(std::move(counts));
}

TaskStats stats_from_counts(std::map<EditTask, size_t> counts) {
    TaskStats stats;
    stats.counts = std::move(counts);
    for (const auto& [task, count] : stats.counts) stats.total += count;
    return stats;
}

void write_stats_csv(const std::filesystem::path& path, const TaskStats& stats) {
    auto fixed2 = [](double value) {
        std::ostringstream out;
        out.setf(std::ios::fixed);
        out.precision(2);
        out << value;
        return out.str();
    };
    CsvWriter csv(path, {"task", "count", "ratio"});
    double ratio_sum = 0.0;
    for (EditTask task : reward::kAllTasks) {
        const auto it = stats.counts.find(task);
        const size_t count = it == stats.counts.end() ? 0 : it->second;
        if (stats.total == 0) {
            csv.row({std::string(reward::task_name(task)), "0", ""});
        } else {
            const double ratio = stats.ratio_percent(task);
            ratio_sum += ratio;
            csv.row({std::string(reward::task_name(task)), std::to_string(count), fixed2(ratio)});
        }
    }
    csv.row({"total", std::to_string(stats.total), stats.total ? fixed2(ratio_sum) : ""});
    csv.flush();
}

void write_cases_jsonl(const std::filesystem::path& path, std::span<const ScoredEntry> entries) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DatapipeError("cannot write dataset: " + path.string());
    for (const ScoredEntry& entry : entries)
        out << case_to_json(entry.edit_case, entry.score).dump() << '\n';
    if (!out) throw DatapipeError("dataset write failed: " + path.string());
}

}  // namespace prefflow::data
