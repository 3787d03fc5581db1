#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dialectbert {

/// Square count matrix, rows = true class, columns = predicted class.
class ConfusionMatrix {
public:
    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::size_t num_classes)
        : n_(num_classes), counts_(num_classes * num_classes, 0) {}

    std::size_t num_classes() const { return n_; }
    std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts_[truth * n_ + pred]; }
    std::uint64_t& at(std::size_t truth, std::size_t pred) { return counts_[truth * n_ + pred]; }
    std::uint64_t total() const;
    std::uint64_t trace() const;
    std::uint64_t row_sum(std::size_t truth) const;
    std::uint64_t column_sum(std::size_t pred) const;

    ConfusionMatrix& operator+=(const ConfusionMatrix& other);
    bool operator==(const ConfusionMatrix&) const = default;

private:
    std::size_t n_ = 0;
    std::vector<std::uint64_t> counts_;
};

/// Throws std::invalid_argument on length mismatch or a value outside [0, num_classes).
ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred, std::size_t num_classes);

struct Scores {
    double accuracy = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
};

struct ClassScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Per-class scores; a zero denominator scores 0.
std::vector<ClassScores> per_class_scores(const ConfusionMatrix& m);

/// Accuracy = trace / total; macro = unweighted mean over every class of the matrix.
/// Throws std::invalid_argument when the matrix has no classes or no observations.
Scores macro_scores(const ConfusionMatrix& m);

struct EvalReport {
    std::vector<std::uint64_t> seeds;
    std::vector<Scores> per_seed;
    Scores mean;
    /// Sample standard deviation (n - 1); zero for a single seed.
    Scores stddev;
    ConfusionMatrix confusion;
};

struct SeedEvaluation {
    std::uint64_t seed = 0;
    ConfusionMatrix confusion;
};

/// Throws std::invalid_argument when empty or when matrix sizes differ.
EvalReport aggregate(std::span<const SeedEvaluation> runs);

/// Human-readable report: per-seed rows, mean +- std, summed confusion matrix.
std::string format_report(const EvalReport& report, std::span<const std::string> class_names);

/// CSV "Model,Acc,F1,Pre,Rec" with percentages to one decimal, one row per model.
std::string format_score_table(std::span<const std::pair<std::string, Scores>> rows);

}  // namespace dialectbert
