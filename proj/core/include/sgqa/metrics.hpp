#pragma once
// Prediction scoring: exact-match accuracy with a binary/open split,
// answer-scope validity, ontology plausibility, and a per-group answer
// distribution divergence, plus fixed-width report formatting.

#include <set>
#include <string>
#include <vector>

#include "sgqa/program.hpp"
#include "sgqa/scene_graph.hpp"

namespace sgqa {

struct PredictionRecord {
    std::string question_id;
    std::string predicted;
    std::string gold;
    std::string group;          // sink fine name | head argument
    std::set<std::string> scope;
    std::string subject_class;  // "" when the head selects no single class
    std::string category;       // sink category, "" when absent
    bool binary = false;
};

struct MetricReport {
    double accuracy = 0.0;
    double binary = 0.0;
    double open = 0.0;
    double validity = 0.0;
    double plausibility = 0.0;
    double distribution = 0.0;  // lower is better
    int records = 0;
    int binary_records = 0;
    int open_records = 0;
    int groups = 0;
};

// Valid answers for a program by its sink: Boolean sinks admit yes/no,
// choose admits its option arguments, common admits the stored category
// names, and query admits the category's value set (classes for name,
// image thirds for the position categories).
std::set<std::string> answer_scope(const Program& program, const Ontology& ontology,
                                   const Catalog& catalog);

// Derives group key, scope, binary flag and plausibility context from a
// validated program.
PredictionRecord make_record(const std::string& question_id, const Program& program,
                             const std::string& gold, const std::string& predicted,
                             const Ontology& ontology, const Catalog& catalog);

// Aggregates a non-empty record set. Plausibility accepts yes/no always,
// checks the ontology table when the record carries a subject class and a
// checkable category, and falls back to scope membership otherwise.
MetricReport score(const std::vector<PredictionRecord>& records, const Ontology& ontology);

struct GroupBreakdown {
    std::string group;
    int records = 0;
    double divergence = 0.0;  // total variation within the group, x100
};

// Per-group gold-vs-predicted answer frequency divergence, sorted by key.
std::vector<GroupBreakdown> distribution_breakdown(
    const std::vector<PredictionRecord>& records);

// Two decimals, ties rounded half-up.
std::string format_percent(double value);

// Header plus one value row: Binary, Open, Validity, Plausibility,
// Distribution (down-arrow marked, lower is better), Accuracy.
std::string format_report(const MetricReport& report);

Json report_to_json(const MetricReport& report);

}  // namespace sgqa
