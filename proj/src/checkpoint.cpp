#include "dialectbert/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

namespace dialectbert {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'D', 'B', 'C', 'K', 'P', 'T', '\r', '\n'};

class Writer {
public:
    explicit Writer(std::ofstream& out) : out_(out) {}

    template <typename T>
    void put(T value) {
        out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
    }
    void bytes(const void* data, std::size_t n) { out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n)); }

private:
    std::ofstream& out_;
};

class Reader {
public:
    Reader(std::ifstream& in, std::string path) : in_(in), path_(std::move(path)) {}

    template <typename T>
    T get(const char* what) {
        T value{};
        bytes(&value, sizeof(T), what);
        return value;
    }
    void bytes(void* data, std::size_t n, const char* what) {
        in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) {
            fail(std::string("truncated while reading ") + what);
        }
    }
    [[noreturn]] void fail(const std::string& msg) const {
        throw std::runtime_error(path_ + ": " + msg);
    }

private:
    std::ifstream& in_;
    std::string path_;
};

}  // namespace

void save_checkpoint(const EncoderModel& model, const std::filesystem::path& path, int value_width) {
    if (value_width != 8 && value_width != 4) {
        throw std::invalid_argument("checkpoint value width must be 4 or 8 bytes, got " + std::to_string(value_width));
    }
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    Writer w(out);
    const ModelConfig& c = model.config();
    w.bytes(kMagic, sizeof(kMagic));
    w.put<std::uint32_t>(kCheckpointVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(value_width));
    for (const std::size_t v : {c.vocab_size, c.hidden, c.layers, c.heads, c.intermediate, c.max_positions,
                                c.type_vocab}) {
        w.put<std::uint64_t>(v);
    }
    w.put<double>(c.dropout);
    w.put<double>(c.init_std);
    w.put<double>(c.layer_norm_eps);
    w.put<std::uint8_t>(c.pooled_classifier ? 1 : 0);
    w.put<std::uint64_t>(model.num_classes());

    const auto& params = model.parameters();
    w.put<std::uint64_t>(params.size());
    for (const NamedParameter& p : params) {
        w.put<std::uint32_t>(static_cast<std::uint32_t>(p.name.size()));
        w.bytes(p.name.data(), p.name.size());
        w.put<std::uint32_t>(static_cast<std::uint32_t>(p.tensor.rank()));
        for (const std::size_t d : p.tensor.shape()) {
            w.put<std::uint64_t>(d);
        }
        if (value_width == 8) {
            w.bytes(p.tensor.data().data(), p.tensor.numel() * sizeof(double));
        } else {
            for (const double v : p.tensor.data()) {
                w.put<float>(static_cast<float>(v));
            }
        }
    }
    if (!out) {
        throw std::runtime_error("failed writing " + path.string());
    }
}

EncoderModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    Reader r(in, path.string());
    char magic[sizeof(kMagic)];
    r.bytes(magic, sizeof(magic), "magic");
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        r.fail("not a checkpoint (bad magic bytes)");
    }
    const auto version = r.get<std::uint32_t>("version");
    if (version != kCheckpointVersion) {
        r.fail("unsupported checkpoint version " + std::to_string(version) + " (expected " +
               std::to_string(kCheckpointVersion) + ")");
    }
    const auto width = r.get<std::uint32_t>("value width");
    if (width != 8 && width != 4) {
        r.fail("unsupported value width " + std::to_string(width));
    }

    ModelConfig c;
    c.vocab_size = r.get<std::uint64_t>("config");
    c.hidden = r.get<std::uint64_t>("config");
    c.layers = r.get<std::uint64_t>("config");
    c.heads = r.get<std::uint64_t>("config");
    c.intermediate = r.get<std::uint64_t>("config");
    c.max_positions = r.get<std::uint64_t>("config");
    c.type_vocab = r.get<std::uint64_t>("config");
    c.dropout = r.get<double>("config");
    c.init_std = r.get<double>("config");
    c.layer_norm_eps = r.get<double>("config");
    c.pooled_classifier = r.get<std::uint8_t>("config") != 0;
    const auto num_classes = r.get<std::uint64_t>("config");
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        r.fail(e.what());
    }

    EncoderModel model(c, 0);
    if (num_classes > 0) {
        model.init_classifier(num_classes, 0);
    }
    std::map<std::string, Tensor> expected;
    for (const NamedParameter& p : model.parameters()) {
        expected.emplace(p.name, p.tensor);
    }

    const auto count = r.get<std::uint64_t>("tensor count");
    if (count != expected.size()) {
        r.fail("expected " + std::to_string(expected.size()) + " tensors for this config, found " +
               std::to_string(count));
    }
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto name_len = r.get<std::uint32_t>("tensor name length");
        if (name_len > 4096) {
            r.fail("implausible tensor name length " + std::to_string(name_len));
        }
        std::string name(name_len, '\0');
        r.bytes(name.data(), name_len, "tensor name");
        const auto it = expected.find(name);
        if (it == expected.end()) {
            r.fail("unknown tensor '" + name + "'");
        }
        Tensor target = it->second;
        const auto rank = r.get<std::uint32_t>("tensor rank");
        Shape shape(rank);
        for (auto& d : shape) {
            d = r.get<std::uint64_t>("tensor shape");
        }
        if (shape != target.shape()) {
            r.fail("tensor '" + name + "' has shape " + shape_str(shape) + ", config expects " +
                   shape_str(target.shape()));
        }
        auto values = target.mutable_data();
        if (width == 8) {
            r.bytes(values.data(), values.size() * sizeof(double), "tensor values");
        } else {
            for (double& v : values) {
                v = static_cast<double>(r.get<float>("tensor values"));
            }
        }
        expected.erase(it);
    }
    if (!expected.empty()) {
        r.fail("missing tensor '" + expected.begin()->first + "'");
    }
    return model;
}

}  // namespace dialectbert
