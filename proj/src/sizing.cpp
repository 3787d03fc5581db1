#include "dialectbert/sizing.hpp"

#include <boost/algorithm/string/trim.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dialectbert {

std::uint64_t count_parameters(const ModelConfig& c) {
    const std::uint64_t v = c.vocab_size, h = c.hidden, l = c.layers, i = c.intermediate, p = c.max_positions,
                        t = c.type_vocab;
    const std::uint64_t embeddings = (v + p + t) * h + 2 * h;
    const std::uint64_t attention = 4 * (h * h + h);
    const std::uint64_t ffn = (h * i + i) + (i * h + h);
    const std::uint64_t norms = 4 * h;
    const std::uint64_t pooler = h * h + h;
    return embeddings + l * (attention + ffn + norms) + pooler;
}

std::uint64_t round_to_millions(std::uint64_t count) {
    return (count + 500'000) / 1'000'000;
}

double disk_estimate_mb(std::uint64_t count, unsigned bytes_per_param) {
    if (count == 0) {
        throw std::invalid_argument("disk estimate needs a positive parameter count");
    }
    return static_cast<double>(count) * bytes_per_param / 1e6;
}

std::vector<SizeReport> size_table(std::span<const SizeRow> rows, const ModelConfig& arch) {
    std::vector<SizeReport> out;
    out.reserve(rows.size());
    for (const SizeRow& row : rows) {
        ModelConfig c = arch;
        c.vocab_size = row.vocab_size;
        SizeReport r;
        r.model = row.model;
        r.vocab_label = row.vocab_label;
        r.vocab_size = row.vocab_size;
        r.parameter_count = count_parameters(c);
        r.parameter_count_millions = round_to_millions(r.parameter_count);
        r.disk_size_mb = disk_estimate_mb(r.parameter_count);
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<SizeRow> parse_size_rows(const std::string& text) {
    std::vector<SizeRow> rows;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        boost::algorithm::trim(line);
        if (line.empty() || line.front() == '#') {
            continue;
        }
        std::vector<std::string> fields;
        std::istringstream ls(line);
        std::string f;
        while (std::getline(ls, f, ',')) {
            boost::algorithm::trim(f);
            fields.push_back(f);
        }
        if (!header_seen) {
            header_seen = true;
            if (fields.size() != 3 || fields[0] != "model" || fields[1] != "vocab_label" || fields[2] != "vocab_size") {
                throw std::invalid_argument("line " + std::to_string(line_no) +
                                            ": expected header 'model,vocab_label,vocab_size'");
            }
            continue;
        }
        if (fields.size() != 3 || fields[0].empty()) {
            throw std::invalid_argument("line " + std::to_string(line_no) + ": expected 3 fields");
        }
        SizeRow row{fields[0], fields[1], 0};
        const auto& num = fields[2];
        const auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), row.vocab_size);
        if (ec != std::errc() || ptr != num.data() + num.size() || row.vocab_size == 0) {
            throw std::invalid_argument("line " + std::to_string(line_no) + ": bad vocab_size '" + num + "'");
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<SizeRow> read_size_rows(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_size_rows(ss.str());
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

std::string format_size_table(std::span<const SizeReport> reports) {
    std::size_t width = 5;
    for (const SizeReport& r : reports) {
        width = std::max(width, r.model.size());
    }
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-*s  %7s  %11s  %9s\n", static_cast<int>(width), "Model", "Vocab",
                  "#Params(M)", "Size(MB)");
    out += buf;
    for (const SizeReport& r : reports) {
        std::snprintf(buf, sizeof(buf), "%-*s  %7s  %11llu  %9.1f\n", static_cast<int>(width), r.model.c_str(),
                      r.vocab_label.c_str(), static_cast<unsigned long long>(r.parameter_count_millions),
                      r.disk_size_mb);
        out += buf;
    }
    return out;
}

}  // namespace dialectbert
