#include "dialectbert/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace dialectbert {

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t t = 0;
    for (const auto c : counts_) {
        t += c;
    }
    return t;
}

std::uint64_t ConfusionMatrix::trace() const {
    std::uint64_t t = 0;
    for (std::size_t i = 0; i < n_; ++i) {
        t += at(i, i);
    }
    return t;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t truth) const {
    std::uint64_t t = 0;
    for (std::size_t j = 0; j < n_; ++j) {
        t += at(truth, j);
    }
    return t;
}

std::uint64_t ConfusionMatrix::column_sum(std::size_t pred) const {
    std::uint64_t t = 0;
    for (std::size_t i = 0; i < n_; ++i) {
        t += at(i, pred);
    }
    return t;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
    if (other.n_ != n_) {
        throw std::invalid_argument("cannot add confusion matrices of " + std::to_string(n_) + " and " +
                                    std::to_string(other.n_) + " classes");
    }
    for (std::size_t i = 0; i < counts_.size(); ++i) {
        counts_[i] += other.counts_[i];
    }
    return *this;
}

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred, std::size_t num_classes) {
    if (y_true.size() != y_pred.size()) {
        throw std::invalid_argument("confusion: " + std::to_string(y_true.size()) + " true labels vs " +
                                    std::to_string(y_pred.size()) + " predictions");
    }
    ConfusionMatrix m(num_classes);
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const int t = y_true[i];
        const int p = y_pred[i];
        if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= num_classes ||
            static_cast<std::size_t>(p) >= num_classes) {
            throw std::invalid_argument("confusion: class index outside [0, " + std::to_string(num_classes) +
                                        ") at position " + std::to_string(i));
        }
        ++m.at(static_cast<std::size_t>(t), static_cast<std::size_t>(p));
    }
    return m;
}

namespace {
double ratio(std::uint64_t num, std::uint64_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}
}  // namespace

std::vector<ClassScores> per_class_scores(const ConfusionMatrix& m) {
    std::vector<ClassScores> out(m.num_classes());
    for (std::size_t k = 0; k < m.num_classes(); ++k) {
        const std::uint64_t tp = m.at(k, k);
        ClassScores& s = out[k];
        s.precision = ratio(tp, m.column_sum(k));
        s.recall = ratio(tp, m.row_sum(k));
        const double d = s.precision + s.recall;
        s.f1 = d == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / d;
    }
    return out;
}

Scores macro_scores(const ConfusionMatrix& m) {
    if (m.num_classes() == 0) {
        throw std::invalid_argument("macro_scores: empty confusion matrix");
    }
    const std::uint64_t total = m.total();
    if (total == 0) {
        throw std::invalid_argument("macro_scores: confusion matrix has no observations");
    }
    Scores s;
    s.accuracy = ratio(m.trace(), total);
    for (const ClassScores& c : per_class_scores(m)) {
        s.macro_precision += c.precision;
        s.macro_recall += c.recall;
        s.macro_f1 += c.f1;
    }
    const auto n = static_cast<double>(m.num_classes());
    s.macro_precision /= n;
    s.macro_recall /= n;
    s.macro_f1 /= n;
    return s;
}

EvalReport aggregate(std::span<const SeedEvaluation> runs) {
    if (runs.empty()) {
        throw std::invalid_argument("aggregate: no runs");
    }
    EvalReport r;
    r.confusion = ConfusionMatrix(runs.front().confusion.num_classes());
    for (const SeedEvaluation& run : runs) {
        r.seeds.push_back(run.seed);
        r.per_seed.push_back(macro_scores(run.confusion));
        r.confusion += run.confusion;
    }
    const auto n = static_cast<double>(runs.size());
    auto field_stats = [&](double Scores::*field, double& mean_out, double& std_out) {
        double sum = 0.0;
        for (const Scores& s : r.per_seed) {
            sum += s.*field;
        }
        mean_out = sum / n;
        if (runs.size() < 2) {
            std_out = 0.0;
            return;
        }
        double sq = 0.0;
        for (const Scores& s : r.per_seed) {
            const double d = s.*field - mean_out;
            sq += d * d;
        }
        std_out = std::sqrt(sq / (n - 1.0));
    };
    field_stats(&Scores::accuracy, r.mean.accuracy, r.stddev.accuracy);
    field_stats(&Scores::macro_precision, r.mean.macro_precision, r.stddev.macro_precision);
    field_stats(&Scores::macro_recall, r.mean.macro_recall, r.stddev.macro_recall);
    field_stats(&Scores::macro_f1, r.mean.macro_f1, r.stddev.macro_f1);
    return r;
}

std::string format_report(const EvalReport& report, std::span<const std::string> class_names) {
    std::string out;
    char buf[256];
    out += "seed,accuracy,macro_precision,macro_recall,macro_f1\n";
    for (std::size_t i = 0; i < report.per_seed.size(); ++i) {
        const Scores& s = report.per_seed[i];
        std::snprintf(buf, sizeof(buf), "%llu,%.6f,%.6f,%.6f,%.6f\n",
                      static_cast<unsigned long long>(report.seeds[i]), s.accuracy, s.macro_precision,
                      s.macro_recall, s.macro_f1);
        out += buf;
    }
    std::snprintf(buf, sizeof(buf), "mean,%.6f,%.6f,%.6f,%.6f\n", report.mean.accuracy, report.mean.macro_precision,
                  report.mean.macro_recall, report.mean.macro_f1);
    out += buf;
    std::snprintf(buf, sizeof(buf), "std,%.6f,%.6f,%.6f,%.6f\n", report.stddev.accuracy,
                  report.stddev.macro_precision, report.stddev.macro_recall, report.stddev.macro_f1);
    out += buf;

    out += "\nconfusion (rows = true, columns = predicted, summed over seeds)\n";
    const std::size_t n = report.confusion.num_classes();
    auto name = [&](std::size_t k) {
        return k < class_names.size() ? class_names[k] : std::to_string(k);
    };
    out += "true\\pred";
    for (std::size_t j = 0; j < n; ++j) {
        out += ',' + name(j);
    }
    out += '\n';
    for (std::size_t i = 0; i < n; ++i) {
        out += name(i);
        for (std::size_t j = 0; j < n; ++j) {
            out += ',' + std::to_string(report.confusion.at(i, j));
        }
        out += '\n';
    }
    return out;
}

std::string format_score_table(std::span<const std::pair<std::string, Scores>> rows) {
    std::string out = "Model,Acc,F1,Pre,Rec\n";
    char buf[128];
    for (const auto& [model, s] : rows) {
        std::snprintf(buf, sizeof(buf), ",%.1f,%.1f,%.1f,%.1f\n", 100.0 * s.accuracy, 100.0 * s.macro_f1,
                      100.0 * s.macro_precision, 100.0 * s.macro_recall);
        out += model;
        out += buf;
    }
    return out;
}

}  // namespace dialectbert
