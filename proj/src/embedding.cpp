#include "simcore/embedding.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

static_assert(std::endian::native == std::endian::little,
              "EMB1 serialization assumes a little-endian host");
static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

namespace simcore {

namespace {

constexpr char kEmbMagic[4] = {'E', 'M', 'B', '1'};
constexpr char kLblMagic[4] = {'L', 'B', 'L', '1'};
constexpr std::size_t kEmbHeaderBytes = 4 + 1 + 1 + 2 + 8 + 4;

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path, const char* what) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) {
        throw std::runtime_error(path + ": truncated file while reading " + what);
    }
    return v;
}

[[noreturn]] void fail_open(const std::string& path) {
    throw std::runtime_error("cannot open file: " + path);
}

}  // namespace

EmbeddingMatrix::EmbeddingMatrix(std::size_t count, std::size_t dim,
                                 std::vector<float> data, bool normalized)
    : count_(count), dim_(dim), data_(std::move(data)), normalized_(normalized) {
    if (count_ < 1) throw std::invalid_argument("embedding matrix requires count >= 1");
    if (dim_ < 1) throw std::invalid_argument("embedding matrix requires dim >= 1");
    if (data_.size() != count_ * dim_) {
        throw std::invalid_argument("embedding data length " + std::to_string(data_.size()) +
                                    " does not match count*dim = " +
                                    std::to_string(count_ * dim_));
    }
}

namespace {

EmbeddingMatrix load_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail_open(path);
    in.seekg(0, std::ios::end);
    const auto file_size = static_cast<std::uint64_t>(in.tellg());
    in.seekg(0, std::ios::beg);

    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kEmbMagic, 4) != 0) {
        throw std::runtime_error(path + ": bad magic, not an EMB1 file");
    }
    const auto version = read_pod<std::uint8_t>(in, path, "version");
    if (version != 1) {
        throw std::runtime_error(path + ": unsupported EMB1 version " + std::to_string(version));
    }
    const auto dtype = read_pod<std::uint8_t>(in, path, "dtype");
    if (dtype != 0) {
        throw std::runtime_error(path + ": unsupported dtype " + std::to_string(dtype) +
                                 " (only f32 = 0)");
    }
    const auto reserved = read_pod<std::uint16_t>(in, path, "reserved");
    if (reserved != 0) {
        throw std::runtime_error(path + ": reserved header field must be 0");
    }
    const auto count = read_pod<std::uint64_t>(in, path, "count");
    const auto dim = read_pod<std::uint32_t>(in, path, "dim");
    if (count < 1 || dim < 1) {
        throw std::runtime_error(path + ": header declares empty matrix (count=" +
                                 std::to_string(count) + ", dim=" + std::to_string(dim) + ")");
    }

    // A valid file is exactly header+payload, optionally followed by a
    // complete label block.
    const std::uint64_t payload_end = kEmbHeaderBytes + count * dim * sizeof(float);
    const std::uint64_t with_labels = payload_end + 4 + 8 + count * sizeof(std::int64_t);
    if (file_size < payload_end) {
        throw std::runtime_error(path + ": payload shorter than count*dim declared in header");
    }
    if (file_size != payload_end && file_size != with_labels) {
        throw std::runtime_error(path + ": unexpected trailing bytes after payload");
    }

    std::vector<float> data(static_cast<std::size_t>(count) * dim);
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
    if (!in) {
        throw std::runtime_error(path + ": payload shorter than count*dim declared in header");
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!std::isfinite(data[i])) {
            throw std::runtime_error(path + ": non-finite value at row " +
                                     std::to_string(i / dim) + ", col " +
                                     std::to_string(i % dim));
        }
    }

    if (file_size == with_labels) {
        char tail[4];
        in.read(tail, 4);
        if (!in || std::memcmp(tail, kLblMagic, 4) != 0) {
            throw std::runtime_error(path + ": unexpected trailing bytes after payload");
        }
        const auto lbl_count = read_pod<std::uint64_t>(in, path, "label count");
        if (lbl_count != count) {
            throw std::runtime_error(path + ": label count " + std::to_string(lbl_count) +
                                     " does not match row count " + std::to_string(count));
        }
    }

    return EmbeddingMatrix(static_cast<std::size_t>(count), dim, std::move(data), false);
}

EmbeddingMatrix load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail_open(path);

    std::vector<float> data;
    std::size_t dim = 0;
    std::size_t row = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::size_t col = 0;
        const char* p = line.data();
        const char* end = p + line.size();
        while (true) {
            const char* comma = std::find(p, end, ',');
            float v = 0.0f;
            auto [ptr, ec] = std::from_chars(p, comma, v);
            if (ec != std::errc() || ptr != comma) {
                throw std::runtime_error(path + ": row " + std::to_string(row) + ", col " +
                                         std::to_string(col) + ": cannot parse value");
            }
            if (!std::isfinite(v)) {
                throw std::runtime_error(path + ": row " + std::to_string(row) + ", col " +
                                         std::to_string(col) + ": non-finite value");
            }
            data.push_back(v);
            ++col;
            if (comma == end) break;
            p = comma + 1;
        }
        if (row == 0) {
            dim = col;
        } else if (col != dim) {
            throw std::runtime_error(path + ": row " + std::to_string(row) + " has " +
                                     std::to_string(col) + " values, expected " +
                                     std::to_string(dim));
        }
        ++row;
    }
    if (row == 0) throw std::runtime_error(path + ": no rows");
    return EmbeddingMatrix(row, dim, std::move(data), false);
}

}  // namespace

EmbeddingMatrix load_embeddings(const std::string& path, EmbFormat format) {
    return format == EmbFormat::binary ? load_binary(path) : load_csv(path);
}

namespace {

void save_binary(const EmbeddingMatrix& m, const LabelVector* labels,
                 const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail_open(path);
    out.write(kEmbMagic, 4);
    write_pod<std::uint8_t>(out, 1);   // version
    write_pod<std::uint8_t>(out, 0);   // dtype f32
    write_pod<std::uint16_t>(out, 0);  // reserved
    write_pod<std::uint64_t>(out, m.count());
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(m.dim()));
    out.write(reinterpret_cast<const char*>(m.data().data()),
              static_cast<std::streamsize>(m.data().size() * sizeof(float)));
    if (labels != nullptr) {
        out.write(kLblMagic, 4);
        write_pod<std::uint64_t>(out, labels->count());
        out.write(reinterpret_cast<const char*>(labels->labels.data()),
                  static_cast<std::streamsize>(labels->count() * sizeof(std::int64_t)));
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

void save_csv(const EmbeddingMatrix& m, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail_open(path);
    char buf[64];
    for (std::size_t i = 0; i < m.count(); ++i) {
        const auto r = m.row(i);
        for (std::size_t j = 0; j < m.dim(); ++j) {
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), r[j]);
            out.write(buf, ptr - buf);
            out.put(j + 1 == m.dim() ? '\n' : ',');
        }
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace

void save_embeddings(const EmbeddingMatrix& m, const std::string& path, EmbFormat format) {
    if (format == EmbFormat::binary) {
        save_binary(m, nullptr, path);
    } else {
        save_csv(m, path);
    }
}

void save_embeddings(const EmbeddingMatrix& m, const LabelVector& labels,
                     const std::string& path) {
    if (labels.count() != m.count()) {
        throw std::invalid_argument("label count " + std::to_string(labels.count()) +
                                    " does not match matrix count " + std::to_string(m.count()));
    }
    save_binary(m, &labels, path);
}

std::optional<LabelVector> load_embedded_labels(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail_open(path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kEmbMagic, 4) != 0) {
        throw std::runtime_error(path + ": not an EMB1 file");
    }
    in.seekg(kEmbHeaderBytes - 8 - 4, std::ios::beg);
    const auto count = read_pod<std::uint64_t>(in, path, "count");
    const auto dim = read_pod<std::uint32_t>(in, path, "dim");
    in.seekg(static_cast<std::streamoff>(count * dim * sizeof(float)), std::ios::cur);
    char tail[4];
    in.read(tail, 4);
    if (in.gcount() == 0) return std::nullopt;
    if (in.gcount() != 4 || std::memcmp(tail, kLblMagic, 4) != 0) {
        throw std::runtime_error(path + ": unexpected trailing bytes after payload");
    }
    const auto lbl_count = read_pod<std::uint64_t>(in, path, "label count");
    if (lbl_count != count) {
        throw std::runtime_error(path + ": label count " + std::to_string(lbl_count) +
                                 " does not match row count " + std::to_string(count));
    }
    LabelVector lv;
    lv.labels.resize(static_cast<std::size_t>(lbl_count));
    in.read(reinterpret_cast<char*>(lv.labels.data()),
            static_cast<std::streamsize>(lv.labels.size() * sizeof(std::int64_t)));
    if (!in) throw std::runtime_error(path + ": truncated label block");
    return lv;
}

LabelVector load_labels(const std::string& path) {
    if (detect_format(path) == EmbFormat::binary) {
        auto lv = load_embedded_labels(path);
        if (!lv) throw std::runtime_error(path + ": EMB1 file carries no label block");
        return std::move(*lv);
    }
    std::ifstream in(path);
    if (!in) fail_open(path);
    LabelVector lv;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::int64_t v = 0;
        auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
        if (ec != std::errc() || ptr != line.data() + line.size()) {
            throw std::runtime_error(path + ": row " + std::to_string(row) +
                                     ": cannot parse label");
        }
        lv.labels.push_back(v);
        ++row;
    }
    return lv;
}

void save_labels(const LabelVector& labels, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail_open(path);
    for (const auto v : labels.labels) out << v << '\n';
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::pair<std::uint64_t, std::uint32_t> read_emb_header(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail_open(path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kEmbMagic, 4) != 0) {
        throw std::runtime_error(path + ": not an EMB1 file");
    }
    read_pod<std::uint8_t>(in, path, "version");
    read_pod<std::uint8_t>(in, path, "dtype");
    read_pod<std::uint16_t>(in, path, "reserved");
    const auto count = read_pod<std::uint64_t>(in, path, "count");
    const auto dim = read_pod<std::uint32_t>(in, path, "dim");
    return {count, dim};
}

EmbFormat detect_format(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail_open(path);
    char magic[4] = {};
    in.read(magic, 4);
    if (in.gcount() == 4 && std::memcmp(magic, kEmbMagic, 4) == 0) return EmbFormat::binary;
    return EmbFormat::csv;
}

EmbeddingMatrix l2_normalize(const EmbeddingMatrix& m) {
    std::vector<float> out(m.data().size());
    for (std::size_t i = 0; i < m.count(); ++i) {
        const auto r = m.row(i);
        double sq = 0.0;
        for (std::size_t j = 0; j < m.dim(); ++j) {
            sq += static_cast<double>(r[j]) * static_cast<double>(r[j]);
        }
        const double norm = std::sqrt(sq);
        if (!(norm > 1e-12)) {
            throw std::runtime_error("cannot normalize row " + std::to_string(i) +
                                     ": norm " + std::to_string(norm) + " is near zero");
        }
        const double inv = 1.0 / norm;
        for (std::size_t j = 0; j < m.dim(); ++j) {
            out[i * m.dim() + j] = static_cast<float>(static_cast<double>(r[j]) * inv);
        }
    }
    return EmbeddingMatrix(m.count(), m.dim(), std::move(out), true);
}

ValidationReport validate(const EmbeddingMatrix& m) {
    ValidationReport rep;
    rep.count = m.count();
    rep.dim = m.dim();
    rep.normalized_flag = m.normalized();
    rep.min_norm = std::numeric_limits<double>::infinity();
    rep.max_norm = 0.0;
    for (std::size_t i = 0; i < m.count(); ++i) {
        const auto r = m.row(i);
        double sq = 0.0;
        for (std::size_t j = 0; j < m.dim(); ++j) {
            const double v = r[j];
            if (rep.all_finite && !std::isfinite(v)) {
                rep.all_finite = false;
                rep.nonfinite_row = i;
                rep.nonfinite_col = j;
            }
            sq += v * v;
        }
        const double norm = std::sqrt(sq);
        rep.min_norm = std::min(rep.min_norm, norm);
        rep.max_norm = std::max(rep.max_norm, norm);
    }
    return rep;
}

std::vector<std::pair<std::size_t, std::size_t>> find_exact_duplicates(
    const EmbeddingMatrix& left, const EmbeddingMatrix& right) {
    std::vector<std::pair<std::size_t, std::size_t>> dups;
    if (left.dim() != right.dim()) {
        throw std::invalid_argument("dimension mismatch: " + std::to_string(left.dim()) +
                                    " vs " + std::to_string(right.dim()));
    }
    const std::size_t row_bytes = left.dim() * sizeof(float);
    std::unordered_multimap<std::string_view, std::size_t> index;
    index.reserve(left.count());
    const char* lbase = reinterpret_cast<const char*>(left.data().data());
    for (std::size_t i = 0; i < left.count(); ++i) {
        index.emplace(std::string_view(lbase + i * row_bytes, row_bytes), i);
    }
    const char* rbase = reinterpret_cast<const char*>(right.data().data());
    for (std::size_t j = 0; j < right.count(); ++j) {
        auto [lo, hi] = index.equal_range(std::string_view(rbase + j * row_bytes, row_bytes));
        for (auto it = lo; it != hi; ++it) dups.emplace_back(it->second, j);
    }
    std::sort(dups.begin(), dups.end());
    return dups;
}

}  // namespace simcore
