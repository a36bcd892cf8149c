#include "msde/data_io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <regex>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>

#include "msde/logging.hpp"

namespace msde {

static_assert(std::endian::native == std::endian::little, "NPY I/O assumes a little-endian host");

namespace {

[[noreturn]] void data_error(const std::string& msg) {
    throw Error(Module::DataIo, ErrorKind::Data, msg);
}

std::vector<std::string> split_fields(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        auto field = line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
        while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
        while (!field.empty() && (field.back() == ' ' || field.back() == '\t')) field.remove_suffix(1);
        out.emplace_back(field);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::optional<double> parse_double(std::string_view s) {
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::vector<std::vector<std::string>> read_csv_rows(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) data_error(fmt::format("cannot open '{}'", path.string()));
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        rows.push_back(split_fields(line));
    }
    return rows;
}

bool is_header(const std::vector<std::string>& row) {
    for (const auto& cell : row)
        if (!parse_double(cell)) return true;
    return false;
}

int parse_label(const std::string& cell, std::size_t row) {
    const auto v = parse_double(cell);
    if (!v || (*v != 0.0 && *v != 1.0))
        data_error(fmt::format("label '{}' at row {} is not 0 or 1", cell, row));
    return static_cast<int>(*v);
}

EmbeddingMatrix load_csv(const std::filesystem::path& path) {
    auto rows = read_csv_rows(path);
    if (rows.empty()) data_error(fmt::format("'{}' is empty", path.string()));

    std::optional<std::size_t> id_col;
    std::optional<std::size_t> label_col;
    std::size_t first_data = 0;
    const std::size_t width = rows.front().size();
    if (is_header(rows.front())) {
        for (std::size_t c = 0; c < width; ++c) {
            if (rows.front()[c] == "row_id") id_col = c;
            else if (rows.front()[c] == "label") label_col = c;
        }
        first_data = 1;
    }
    const std::size_t n = rows.size() - first_data;
    const std::size_t d = width - (id_col ? 1 : 0) - (label_col ? 1 : 0);
    if (d == 0) data_error(fmt::format("'{}' has no feature columns", path.string()));

    EmbeddingMatrix m;
    m.values.resize(static_cast<Index>(n), static_cast<Index>(d));
    m.row_ids.reserve(n);
    if (label_col) m.labels.emplace().reserve(n);
    for (std::size_t r = 0; r < n; ++r) {
        const auto& row = rows[first_data + r];
        if (row.size() != width)
            data_error(fmt::format("row {} has {} fields, expected {}", r, row.size(), width));
        Index feature = 0;
        for (std::size_t c = 0; c < width; ++c) {
            if (id_col && c == *id_col) continue;
            if (label_col && c == *label_col) continue;
            const auto v = parse_double(row[c]);
            if (!v) data_error(fmt::format("non-numeric value '{}' at row {}, column {}", row[c], r, c));
            if (!std::isfinite(*v))
                data_error(fmt::format("non-finite value '{}' at row {}, column {}", row[c], r, c));
            m.values(static_cast<Index>(r), feature++) = *v;
        }
        m.row_ids.push_back(id_col ? row[*id_col] : std::to_string(r));
        if (label_col) m.labels->push_back(parse_label(row[*label_col], r));
    }
    m.validate();
    return m;
}

struct NpyHeader {
    std::string descr;
    bool fortran_order = false;
    std::vector<Index> shape;
};

NpyHeader parse_npy_header(const std::string& header) {
    static const std::regex descr_re(R"('descr'\s*:\s*'([^']*)')");
    static const std::regex order_re(R"('fortran_order'\s*:\s*(True|False))");
    static const std::regex shape_re(R"('shape'\s*:\s*\(([^)]*)\))");
    std::smatch m;
    NpyHeader h;
    if (!std::regex_search(header, m, descr_re)) data_error("NPY header has no 'descr'");
    h.descr = m[1];
    if (!std::regex_search(header, m, order_re)) data_error("NPY header has no 'fortran_order'");
    h.fortran_order = m[1] == "True";
    if (!std::regex_search(header, m, shape_re)) data_error("NPY header has no 'shape'");
    std::stringstream dims(m[1].str());
    std::string tok;
    while (std::getline(dims, tok, ',')) {
        tok.erase(0, tok.find_first_not_of(" \t"));
        tok.erase(tok.find_last_not_of(" \t") + 1);
        if (tok.empty()) continue;
        Index v = 0;
        const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || ptr != tok.data() + tok.size())
            data_error(fmt::format("NPY shape entry '{}' is not an integer", tok));
        h.shape.push_back(v);
    }
    return h;
}

EmbeddingMatrix load_npy(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) data_error(fmt::format("cannot open '{}'", path.string()));
    char magic[6];
    if (!in.read(magic, 6) || std::memcmp(magic, "\x93NUMPY", 6) != 0)
        data_error(fmt::format("'{}' is not an NPY file (bad magic)", path.string()));
    unsigned char version[2];
    in.read(reinterpret_cast<char*>(version), 2);
    if (!in || version[0] != 1 || version[1] != 0)
        data_error(fmt::format("NPY version {}.{} unsupported, only 1.0", int(version[0]), int(version[1])));
    unsigned char len_bytes[2];
    in.read(reinterpret_cast<char*>(len_bytes), 2);
    const std::size_t header_len = len_bytes[0] | (std::size_t(len_bytes[1]) << 8);
    std::string header(header_len, '\0');
    if (!in.read(header.data(), static_cast<std::streamsize>(header_len)))
        data_error("NPY header truncated");

    const auto h = parse_npy_header(header);
    if (h.descr != "<f8" && h.descr != "<f4")
        data_error(fmt::format("NPY dtype '{}' unsupported, expected '<f4' or '<f8'", h.descr));
    if (h.fortran_order) data_error("NPY fortran_order arrays are unsupported");
    if (h.shape.size() != 2)
        data_error(fmt::format("NPY array is {}-D, expected 2-D", h.shape.size()));
    const Index n = h.shape[0];
    const Index d = h.shape[1];
    if (d == 0) data_error("NPY array has dimension 0");

    RowMatrix<double> values(n, d);
    const std::size_t count = static_cast<std::size_t>(n * d);
    if (h.descr == "<f8") {
        if (!in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(count * 8)))
            data_error("NPY payload truncated");
    } else {
        std::vector<float> buf(count);
        if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count * 4)))
            data_error("NPY payload truncated");
        for (std::size_t i = 0; i < count; ++i) values.data()[i] = static_cast<double>(buf[i]);
    }
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < d; ++j)
            if (!std::isfinite(values(i, j)))
                data_error(fmt::format("non-finite value at row {}, column {}", i, j));
    auto m = EmbeddingMatrix::from_values(std::move(values));
    m.validate();
    return m;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Module::DataIo, ErrorKind::Data, fmt::format("cannot write '{}'", path.string()));
    return out;
}

std::string num17(double v) { return fmt::format("{:.17g}", v); }

}  // namespace

FileFormat format_from_path(const std::filesystem::path& path) {
    return path.extension() == ".npy" ? FileFormat::Npy : FileFormat::Csv;
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path, FileFormat format) {
    if (!std::filesystem::exists(path)) data_error(fmt::format("'{}' does not exist", path.string()));
    return format == FileFormat::Npy ? load_npy(path) : load_csv(path);
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path) {
    return load_embeddings(path, format_from_path(path));
}

void save_npy(const std::filesystem::path& path, const RowMatrix<double>& values) {
    std::string header = fmt::format("{{'descr': '<f8', 'fortran_order': False, 'shape': ({}, {}), }}",
                                     values.rows(), values.cols());
    const std::size_t unpadded = 10 + header.size() + 1;
    header.append((64 - unpadded % 64) % 64, ' ');
    header.push_back('\n');
    auto out = open_for_write(path);
    out.write("\x93NUMPY\x01\x00", 8);
    const unsigned char len[2] = {static_cast<unsigned char>(header.size() & 0xff),
                                  static_cast<unsigned char>(header.size() >> 8)};
    out.write(reinterpret_cast<const char*>(len), 2);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!out) throw Error(Module::DataIo, ErrorKind::Data, fmt::format("write to '{}' failed", path.string()));
}

void save_csv(const std::filesystem::path& path, const EmbeddingMatrix& m) {
    auto out = open_for_write(path);
    out << "row_id";
    for (Index j = 0; j < m.dim(); ++j) out << ",f" << j;
    if (m.labels) out << ",label";
    out << '\n';
    for (Index i = 0; i < m.n_samples(); ++i) {
        out << m.row_ids[static_cast<std::size_t>(i)];
        for (Index j = 0; j < m.dim(); ++j) out << ',' << num17(m.values(i, j));
        if (m.labels) out << ',' << (*m.labels)[static_cast<std::size_t>(i)];
        out << '\n';
    }
}

std::vector<std::pair<std::string, int>> load_labels(const std::filesystem::path& path) {
    const auto rows = read_csv_rows(path);
    std::vector<std::pair<std::string, int>> out;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != 2) data_error(fmt::format("labels row {} has {} fields, expected 2", r, rows[r].size()));
        if (r == 0 && rows[r][0] == "row_id") continue;
        out.emplace_back(rows[r][0], parse_label(rows[r][1], r));
    }
    return out;
}

void save_labels(const std::filesystem::path& path, const EmbeddingMatrix& m) {
    if (!m.labels) throw Error(Module::DataIo, ErrorKind::Data, "matrix has no labels to save");
    auto out = open_for_write(path);
    out << "row_id,label\n";
    for (std::size_t i = 0; i < m.row_ids.size(); ++i) out << m.row_ids[i] << ',' << (*m.labels)[i] << '\n';
}

void attach_labels(EmbeddingMatrix& m, const std::vector<std::pair<std::string, int>>& labels) {
    std::unordered_map<std::string, int> by_id;
    for (const auto& [id, label] : labels)
        if (!by_id.emplace(id, label).second) data_error(fmt::format("label file repeats row id '{}'", id));
    std::vector<int> out;
    out.reserve(m.row_ids.size());
    for (const auto& id : m.row_ids) {
        const auto it = by_id.find(id);
        if (it == by_id.end()) data_error(fmt::format("no label for row id '{}'", id));
        out.push_back(it->second);
    }
    if (by_id.size() != m.row_ids.size())
        data_error(fmt::format("label file has {} ids but the matrix has {} rows", by_id.size(), m.row_ids.size()));
    m.labels = std::move(out);
}

Standardizer fit_standardizer(const EmbeddingMatrix& train) {
    const Index n = train.n_samples();
    if (n < 2) data_error(fmt::format("standardizer needs at least 2 rows, got {}", n));
    Standardizer s;
    s.mean = train.values.colwise().mean().transpose();
    const RowMatrix<double> centered = train.values.rowwise() - s.mean.transpose();
    s.std = (centered.colwise().squaredNorm().transpose() / static_cast<double>(n - 1)).cwiseSqrt();
    for (Index j = 0; j < s.std.size(); ++j)
        if (s.std(j) < kStdFloor) s.std(j) = 1.0;
    return s;
}

EmbeddingMatrix apply_standardizer(const Standardizer& s, const EmbeddingMatrix& x) {
    if (x.dim() != s.dim())
        throw Error(Module::DataIo, ErrorKind::Data,
                    fmt::format("standardizer fitted on dimension {} applied to dimension {}", s.dim(), x.dim()));
    RowMatrix<double> z = (x.values.rowwise() - s.mean.transpose()).array().rowwise() / s.std.transpose().array();
    return x.with_values(std::move(z));
}

DatasetSplit generate_synthetic(const BlobSpec& spec, std::uint64_t seed) {
    if (spec.dim < 1 || spec.n_train < 1 || spec.n_test_normal < 1 || spec.n_test_anomalous < 1)
        throw Error(Module::DataIo, ErrorKind::Usage,
                    fmt::format("synthetic counts must be >= 1 (dim={}, n_train={}, n_test_normal={}, "
                                "n_test_anomalous={})",
                                spec.dim, spec.n_train, spec.n_test_normal, spec.n_test_anomalous));
    if (!(spec.noise_scale > 0.0))
        throw Error(Module::DataIo, ErrorKind::Usage, "synthetic noise_scale must be > 0");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, spec.noise_scale);
    auto draw = [&](Index rows) {
        RowMatrix<double> m(rows, spec.dim);
        for (Index i = 0; i < rows; ++i)
            for (Index j = 0; j < spec.dim; ++j) m(i, j) = noise(rng);
        return m;
    };

    DatasetSplit split;
    split.train = EmbeddingMatrix::from_values(draw(spec.n_train), "train-");
    const Index m = spec.n_test_normal + spec.n_test_anomalous;
    RowMatrix<double> test = draw(m);
    test.bottomRows(spec.n_test_anomalous).col(0).array() += spec.anomaly_offset;
    split.test = EmbeddingMatrix::from_values(std::move(test), "test-");
    auto& labels = split.test.labels.emplace(static_cast<std::size_t>(m), 0);
    std::fill(labels.begin() + spec.n_test_normal, labels.end(), 1);
    return split;
}

void save_scores(const ScoreReport& report, const std::filesystem::path& path) {
    const auto n = report.raw.size();
    if (report.normalized.size() != n || report.labels.size() != n || report.row_ids.size() != n)
        throw Error(Module::DataIo, ErrorKind::Data, "score report columns have mismatched lengths");
    if (n == 0) logger()->warn("writing empty score file '{}'", path.string());
    auto out = open_for_write(path);
    out << "row_id,label,raw_score,normalized_score\n";
    for (std::size_t i = 0; i < n; ++i)
        out << report.row_ids[i] << ',' << report.labels[i] << ',' << num17(report.raw[i]) << ','
            << num17(report.normalized[i]) << '\n';
    if (!out) throw Error(Module::DataIo, ErrorKind::Data, fmt::format("write to '{}' failed", path.string()));
}

ScoreReport load_scores(const std::filesystem::path& path) {
    const auto rows = read_csv_rows(path);
    if (rows.empty() || rows.front() != std::vector<std::string>{"row_id", "label", "raw_score", "normalized_score"})
        data_error(fmt::format("'{}' lacks the header row_id,label,raw_score,normalized_score", path.string()));
    ScoreReport r;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (row.size() != 4) data_error(fmt::format("score row {} has {} fields, expected 4", i - 1, row.size()));
        const auto raw = parse_double(row[2]);
        const auto norm = parse_double(row[3]);
        if (!raw || !norm) data_error(fmt::format("score row {} has a non-numeric score", i - 1));
        r.row_ids.push_back(row[0]);
        r.labels.push_back(parse_label(row[1], i - 1));
        r.raw.push_back(*raw);
        r.normalized.push_back(*norm);
    }
    return r;
}

}  // namespace msde
