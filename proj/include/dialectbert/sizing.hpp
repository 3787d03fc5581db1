#pragma once

#include "dialectbert/model.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace dialectbert {

/// Encoder parameters: embeddings + embedding LayerNorm, L blocks of attention,
/// feed-forward and two LayerNorms, plus the pooler. The tied MLM head and any
/// classifier are not counted.
std::uint64_t count_parameters(const ModelConfig& config);

/// Nearest million, halves rounded up.
std::uint64_t round_to_millions(std::uint64_t count);

/// count * bytes_per_param / 1e6. Throws std::invalid_argument for a zero count.
double disk_estimate_mb(std::uint64_t count, unsigned bytes_per_param = 4);

struct SizeRow {
    std::string model;
    /// Label as printed in the table, e.g. "30k".
    std::string vocab_label;
    std::size_t vocab_size = 0;
};

struct SizeReport {
    std::string model;
    std::string vocab_label;
    std::size_t vocab_size = 0;
    std::uint64_t parameter_count = 0;
    std::uint64_t parameter_count_millions = 0;
    double disk_size_mb = 0.0;
};

/// One report per row; the architecture is taken from `arch` with its vocab_size replaced.
std::vector<SizeReport> size_table(std::span<const SizeRow> rows, const ModelConfig& arch);

/// CSV with header "model,vocab_label,vocab_size"; '#' lines and blank lines are skipped.
std::vector<SizeRow> parse_size_rows(const std::string& text);
std::vector<SizeRow> read_size_rows(const std::filesystem::path& path);

/// Fixed-width table with columns Model, Vocab, #Params(M), Size(MB).
std::string format_size_table(std::span<const SizeReport> reports);

}  // namespace dialectbert
