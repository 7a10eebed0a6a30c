#include "sgqa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <utility>

namespace sgqa {

namespace {

const std::set<std::string>& yes_no() {
    static const std::set<std::string> answers = {"yes", "no"};
    return answers;
}

}  // namespace

std::set<std::string> answer_scope(const Program& program, const Ontology& ontology,
                                   const Catalog& catalog) {
    if (program.functions.empty()) throw EmptyInput("empty program has no answer scope");
    const FunctionCall& sink = program.functions.back();
    const FunctionSignature& sig = catalog.resolve(sink);
    if (sig.output_type == ValueType::ObjList) {
        throw TypeMismatch("program sink '" + sink.fine_name() +
                           "' produces an object list, not an answer");
    }
    if (sig.output_type == ValueType::Boolean) return yes_no();
    if (sink.operation == "choose") {
        return {sink.arguments.begin(), sink.arguments.end()};
    }
    if (sink.operation == "common") {
        const std::vector<std::string> names = ontology.category_names();
        return {names.begin(), names.end()};
    }
    if (sink.category == "name") return ontology.classes;
    if (sink.category == kCatHPosition) return {"left", "middle", "right"};
    if (sink.category == kCatVPosition) return {"top", "middle", "bottom"};
    auto cat = ontology.attribute_categories.find(sink.category);
    if (cat == ontology.attribute_categories.end()) {
        throw UnknownCategory("no attribute category '" + sink.category + "'");
    }
    return cat->second;
}

PredictionRecord make_record(const std::string& question_id, const Program& program,
                             const std::string& gold, const std::string& predicted,
                             const Ontology& ontology, const Catalog& catalog) {
    if (program.functions.empty()) throw EmptyInput("empty program has no record");
    const FunctionCall& sink = program.functions.back();
    const FunctionCall& head = program.functions.front();
    const std::string head_arg = head.arguments.empty() ? "" : head.arguments[0];

    PredictionRecord rec;
    rec.question_id = question_id;
    rec.predicted = predicted;
    rec.gold = gold;
    rec.group = sink.fine_name() + " | " + head_arg;
    rec.scope = answer_scope(program, ontology, catalog);
    rec.subject_class = ontology.has_class(head_arg) ? head_arg : "";
    rec.category = sink.category;
    rec.binary = catalog.resolve(sink).output_type == ValueType::Boolean ||
                 sink.operation == "choose";
    return rec;
}

MetricReport score(const std::vector<PredictionRecord>& records, const Ontology& ontology) {
    if (records.empty()) throw EmptyInput("no prediction records to score");

    MetricReport report;
    report.records = static_cast<int>(records.size());
    int correct = 0, binary_correct = 0, open_correct = 0, valid = 0, plausible = 0;
    for (const PredictionRecord& rec : records) {
        const bool hit = rec.predicted == rec.gold;
        correct += hit ? 1 : 0;
        if (rec.binary) {
            ++report.binary_records;
            binary_correct += hit ? 1 : 0;
        } else {
            ++report.open_records;
            open_correct += hit ? 1 : 0;
        }
        if (rec.scope.count(rec.predicted) > 0) ++valid;

        const bool checkable = !rec.subject_class.empty() &&
                               (ontology.has_category(rec.category) ||
                                is_position_category(rec.category));
        if (yes_no().count(rec.predicted) > 0) {
            ++plausible;
        } else if (checkable) {
            plausible +=
                ontology.plausible(rec.subject_class, rec.category, rec.predicted) ? 1 : 0;
        } else {
            plausible += rec.scope.count(rec.predicted) > 0 ? 1 : 0;
        }
    }

    const double n = static_cast<double>(report.records);
    report.accuracy = 100.0 * correct / n;
    report.binary =
        report.binary_records > 0 ? 100.0 * binary_correct / report.binary_records : 0.0;
    report.open = report.open_records > 0 ? 100.0 * open_correct / report.open_records : 0.0;
    report.validity = 100.0 * valid / n;
    report.plausibility = 100.0 * plausible / n;

    const std::vector<GroupBreakdown> groups = distribution_breakdown(records);
    report.groups = static_cast<int>(groups.size());
    double total = 0.0;
    for (const GroupBreakdown& g : groups) total += g.divergence;
    report.distribution = total / static_cast<double>(groups.size());
    return report;
}

std::vector<GroupBreakdown> distribution_breakdown(
    const std::vector<PredictionRecord>& records) {
    struct Freqs {
        std::map<std::string, int> gold;
        std::map<std::string, int> predicted;
        int count = 0;
    };
    std::map<std::string, Freqs> by_group;
    for (const PredictionRecord& rec : records) {
        Freqs& f = by_group[rec.group];
        ++f.gold[rec.gold];
        ++f.predicted[rec.predicted];
        ++f.count;
    }

    std::vector<GroupBreakdown> out;
    for (const auto& [group, f] : by_group) {
        std::set<std::string> answers;
        for (const auto& [answer, freq] : f.gold) answers.insert(answer);
        for (const auto& [answer, freq] : f.predicted) answers.insert(answer);
        const double n = static_cast<double>(f.count);
        double tv = 0.0;
        for (const std::string& answer : answers) {
            const auto g = f.gold.find(answer);
            const auto p = f.predicted.find(answer);
            const double gq = g == f.gold.end() ? 0.0 : g->second / n;
            const double pq = p == f.predicted.end() ? 0.0 : p->second / n;
            tv += std::abs(gq - pq);
        }
        out.push_back({group, f.count, 50.0 * tv});
    }
    return out;
}

std::string format_percent(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", std::floor(value * 100.0 + 0.5) / 100.0);
    return buf;
}

namespace {

std::size_t display_width(const std::string& text) {
    std::size_t width = 0;
    for (const char c : text) {
        if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++width;
    }
    return width;
}

}  // namespace

std::string format_report(const MetricReport& report) {
    const std::vector<std::pair<std::string, double>> columns = {
        {"Binary", report.binary},
        {"Open", report.open},
        {"Validity", report.validity},
        {"Plausibility", report.plausibility},
        {"Distribution↓", report.distribution},
        {"Accuracy", report.accuracy},
    };
    std::string header, row;
    for (std::size_t i = 0; i < columns.size(); ++i) {
        const std::string value = format_percent(columns[i].second);
        const std::size_t width = std::max(display_width(columns[i].first), value.size());
        if (i > 0) {
            header += "  ";
            row += "  ";
        }
        header += std::string(width - display_width(columns[i].first), ' ') + columns[i].first;
        row += std::string(width - value.size(), ' ') + value;
    }
    return header + "\n" + row + "\n";
}

Json report_to_json(const MetricReport& report) {
    return Json{{"binary", report.binary},
                {"open", report.open},
                {"validity", report.validity},
                {"plausibility", report.plausibility},
                {"distribution", report.distribution},
                {"accuracy", report.accuracy},
                {"records", report.records},
                {"binary_records", report.binary_records},
                {"open_records", report.open_records},
                {"groups", report.groups}};
}

}  // namespace sgqa
