// SPDX-License-Identifier: Apache-2.0

#include "ticktack/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "ticktack/error.hpp"

namespace ticktack {

namespace {

constexpr char kMagic[8] = {'T', 'I', 'C', 'K', 'T', 'A', 'C', 'K'};

class Writer {
public:
    void bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        buf_.insert(buf_.end(), p, p + n);
    }
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    [[nodiscard]] const std::vector<unsigned char>& buffer() const { return buf_; }

private:
    std::vector<unsigned char> buf_;
};

class Reader {
public:
    explicit Reader(std::vector<unsigned char> data) : data_(std::move(data)) {}

    void need(std::size_t n) const {
        if (at_ + n > data_.size()) throw Error(ErrorCode::ParseError, "container truncated");
    }
    std::uint8_t u8() {
        need(1);
        return data_[at_++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[at_++]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[at_++]) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        const std::uint32_t n = u32();
        need(n);
        std::string s(reinterpret_cast<const char*>(data_.data() + at_), n);
        at_ += n;
        return s;
    }
    [[nodiscard]] std::size_t position() const { return at_; }
    [[nodiscard]] const std::vector<unsigned char>& data() const { return data_; }

private:
    std::vector<unsigned char> data_;
    std::size_t at_ = 0;
};

std::uint64_t fnv1a(const unsigned char* data, std::size_t n) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= data[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string join_lines(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out.push_back('\n');
        out += items[i];
    }
    return out;
}

std::vector<std::string> split_lines(const std::string& s) {
    std::vector<std::string> out;
    std::string line;
    std::istringstream in(s);
    while (std::getline(in, line)) out.push_back(line);
    return out;
}

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

const std::string& meta(const Container& c, const std::string& key) {
    auto it = c.metadata.find(key);
    if (it == c.metadata.end()) throw Error(ErrorCode::ParseError, "container lacks metadata '" + key + "'");
    return it->second;
}

}  // namespace

void write_container(std::ostream& out, const Container& c) {
    Writer w;
    w.bytes(kMagic, sizeof kMagic);
    w.u32(Container::kVersion);
    w.u32(static_cast<std::uint32_t>(c.metadata.size()));
    for (const auto& [k, v] : c.metadata) {
        w.str(k);
        w.str(v);
    }
    w.u32(static_cast<std::uint32_t>(c.tensors.tensor_count()));
    for (const auto& t : c.tensors) {
        w.str(t.name);
        w.u8(t.trainable ? 1 : 0);
        w.u32(static_cast<std::uint32_t>(t.value.rows()));
        w.u32(static_cast<std::uint32_t>(t.value.cols()));
        for (Eigen::Index r = 0; r < t.value.rows(); ++r) {
            for (Eigen::Index col = 0; col < t.value.cols(); ++col) w.f64(t.value(r, col));
        }
    }
    const auto& buf = w.buffer();
    const std::uint64_t sum = fnv1a(buf.data(), buf.size());
    Writer tail;
    tail.u64(sum);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    out.write(reinterpret_cast<const char*>(tail.buffer().data()), 8);
    if (!out) throw Error(ErrorCode::IoFailure, "failed to write container");
}

Container read_container(std::istream& in) {
    std::vector<unsigned char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (data.size() < sizeof kMagic + 16 || std::memcmp(data.data(), kMagic, sizeof kMagic) != 0) {
        throw Error(ErrorCode::ParseError, "not a ticktack container");
    }
    Reader r(std::move(data));
    for (std::size_t i = 0; i < sizeof kMagic; ++i) r.u8();
    const std::uint32_t version = r.u32();
    if (version != Container::kVersion) {
        throw Error(ErrorCode::ParseError, "unsupported container version " + std::to_string(version));
    }
    Container c;
    const std::uint32_t m = r.u32();
    for (std::uint32_t i = 0; i < m; ++i) {
        std::string k = r.str();
        c.metadata[k] = r.str();
    }
    const std::uint32_t t = r.u32();
    for (std::uint32_t i = 0; i < t; ++i) {
        std::string name = r.str();
        const bool trainable = r.u8() != 0;
        const std::uint32_t rows = r.u32();
        const std::uint32_t cols = r.u32();
        r.need(static_cast<std::size_t>(rows) * cols * 8);
        Eigen::MatrixXd value(rows, cols);
        for (std::uint32_t row = 0; row < rows; ++row) {
            for (std::uint32_t col = 0; col < cols; ++col) value(row, col) = r.f64();
        }
        c.tensors.add(std::move(name), std::move(value), trainable);
    }
    const std::size_t body = r.position();
    const std::uint64_t expected = fnv1a(r.data().data(), body);
    if (r.u64() != expected) throw Error(ErrorCode::ParseError, "container checksum mismatch");
    if (r.position() != r.data().size()) throw Error(ErrorCode::ParseError, "trailing bytes after container");
    return c;
}

void save_container(const std::string& path, const Container& c) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write '" + path + "'");
    write_container(out, c);
}

Container load_container(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open '" + path + "'");
    return read_container(in);
}

Container to_container(const Checkpoint& ckpt) {
    Container c;
    c.metadata = ckpt.extra;
    c.metadata["kind"] = "checkpoint";
    c.metadata["model.vocab_size"] = std::to_string(ckpt.model.vocab_size);
    c.metadata["model.dim"] = std::to_string(ckpt.model.dim);
    c.metadata["model.n_layers"] = std::to_string(ckpt.model.n_layers);
    c.metadata["model.n_heads"] = std::to_string(ckpt.model.n_heads);
    c.metadata["model.max_seq_len"] = std::to_string(ckpt.model.max_seq_len);
    c.metadata["model.adapter_rank"] = std::to_string(ckpt.model.adapter_rank);
    c.metadata["model.seed"] = std::to_string(ckpt.model.seed);
    c.metadata["encoding.alpha"] = fmt_double(ckpt.encoding.alpha);
    c.metadata["encoding.beta"] = fmt_double(ckpt.encoding.beta);
    c.metadata["encoding.dim"] = std::to_string(ckpt.encoding.dim);
    c.metadata["encoding.wavelength_base"] = fmt_double(ckpt.encoding.wavelength_base);
    c.metadata["seed"] = std::to_string(ckpt.seed);
    c.metadata["step"] = std::to_string(ckpt.step);
    c.metadata["vocab"] = join_lines(ckpt.vocabulary);
    c.tensors = ckpt.params;
    return c;
}

Checkpoint checkpoint_from(const Container& c) {
    if (meta(c, "kind") != "checkpoint") throw Error(ErrorCode::ParseError, "container is not a checkpoint");
    Checkpoint ckpt;
    try {
        ckpt.model.vocab_size = std::stoi(meta(c, "model.vocab_size"));
        ckpt.model.dim = std::stoi(meta(c, "model.dim"));
        ckpt.model.n_layers = std::stoi(meta(c, "model.n_layers"));
        ckpt.model.n_heads = std::stoi(meta(c, "model.n_heads"));
        ckpt.model.max_seq_len = std::stoi(meta(c, "model.max_seq_len"));
        ckpt.model.adapter_rank = std::stoi(meta(c, "model.adapter_rank"));
        ckpt.model.seed = std::stoull(meta(c, "model.seed"));
        ckpt.encoding.alpha = std::stod(meta(c, "encoding.alpha"));
        ckpt.encoding.beta = std::stod(meta(c, "encoding.beta"));
        ckpt.encoding.dim = std::stoi(meta(c, "encoding.dim"));
        ckpt.encoding.wavelength_base = std::stod(meta(c, "encoding.wavelength_base"));
        ckpt.seed = std::stoull(meta(c, "seed"));
        ckpt.step = std::stoull(meta(c, "step"));
    } catch (const std::logic_error& e) {
        throw Error(ErrorCode::ParseError, std::string("bad checkpoint metadata: ") + e.what());
    }
    ckpt.vocabulary = split_lines(meta(c, "vocab"));
    ckpt.params = c.tensors;
    for (const auto& [k, v] : c.metadata) {
        if (k.rfind("model.", 0) == 0 || k.rfind("encoding.", 0) == 0) continue;
        if (k == "kind" || k == "seed" || k == "step" || k == "vocab") continue;
        ckpt.extra[k] = v;
    }
    const ParameterSet expected = init_parameters(ckpt.model);
    if (!expected.same_layout(ckpt.params)) {
        throw Error(ErrorCode::ShapeMismatch, "checkpoint tensors do not match its model config");
    }
    return ckpt;
}

Container to_container(const FisherDiagonal& fisher) {
    Container c;
    c.metadata["kind"] = "fisher";
    c.metadata["sample_count"] = std::to_string(fisher.sample_count);
    c.tensors = fisher.values;
    return c;
}

FisherDiagonal fisher_from(const Container& c) {
    if (meta(c, "kind") != "fisher") throw Error(ErrorCode::ParseError, "container is not a Fisher file");
    FisherDiagonal f;
    f.values = c.tensors;
    try {
        f.sample_count = std::stoull(meta(c, "sample_count"));
    } catch (const std::logic_error&) {
        throw Error(ErrorCode::ParseError, "bad Fisher sample_count '" + meta(c, "sample_count") + "'");
    }
    for (const auto& t : f.values) {
        if ((t.value.array() < 0.0).any()) throw Error(ErrorCode::ParseError, "negative Fisher entry");
    }
    return f;
}

}  // namespace ticktack
