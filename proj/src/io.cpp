#include "lrgda/io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace lrgda {

void put_u32(std::string& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_u64(std::string& out, std::uint64_t v)
{
    for (int i = 0; i < 8; ++i)
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_f64(std::string& out, double v)
{
    put_u64(out, std::bit_cast<std::uint64_t>(v));
}

std::uint32_t get_u32(std::string_view bytes, std::size_t offset)
{
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
    return v;
}

std::uint64_t get_u64(std::string_view bytes, std::size_t offset)
{
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
    return v;
}

double get_f64(std::string_view bytes, std::size_t offset)
{
    return std::bit_cast<double>(get_u64(bytes, offset));
}

std::string encode_fmx(const FeatureMatrix& m)
{
    m.validate();
    std::string out;
    const auto rows = static_cast<std::uint64_t>(m.rows());
    const auto cols = static_cast<std::uint64_t>(m.cols());
    out.reserve(kFmxHeaderBytes + rows * cols * 8 + (m.has_labels() ? rows * 4 : 0));
    out.append("FMX1", 4);
    put_u32(out, m.has_labels() ? kFmxFlagLabels : 0u);
    put_u64(out, rows);
    put_u32(out, static_cast<std::uint32_t>(cols));
    put_u32(out, 0u);
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j)
            put_f64(out, m.data(i, j));
    if (m.has_labels())
        for (ClassId l : *m.labels)
            put_u32(out, l);
    return out;
}

FeatureMatrix decode_fmx(std::string_view bytes)
{
    if (bytes.size() < kFmxHeaderBytes)
        throw InputError("FMX1: truncated header at byte offset " + std::to_string(bytes.size()) + " (need " +
                         std::to_string(kFmxHeaderBytes) + " bytes)");
    if (bytes.substr(0, 4) != "FMX1")
        throw InputError("FMX1: bad magic at byte offset 0");
    const std::uint32_t flags = get_u32(bytes, 4);
    if (flags & ~kFmxFlagLabels) {
        std::ostringstream msg;
        msg << "FMX1: unknown flag bits 0x" << std::hex << flags << " at byte offset 4";
        throw InputError(msg.str());
    }
    const std::uint64_t rows = get_u64(bytes, 8);
    const std::uint32_t cols = get_u32(bytes, 16);
    if (cols == 0)
        throw InputError("FMX1: zero columns at byte offset 16");
    const bool labelled = flags & kFmxFlagLabels;
    // Guard the size arithmetic before trusting rows.
    const std::uint64_t avail = bytes.size() - kFmxHeaderBytes;
    const std::uint64_t per_row = 8ull * cols + (labelled ? 4ull : 0ull);
    if (rows > avail / per_row + 1)
        throw InputError("FMX1: header claims " + std::to_string(rows) + " rows but file has only " +
                         std::to_string(bytes.size()) + " bytes");
    const std::uint64_t need = kFmxHeaderBytes + rows * per_row;
    if (bytes.size() < need)
        throw InputError("FMX1: truncated payload at byte offset " + std::to_string(bytes.size()) +
                         " (expected " + std::to_string(need) + " bytes)");
    if (bytes.size() > need)
        throw InputError("FMX1: " + std::to_string(bytes.size() - need) + " trailing bytes at byte offset " +
                         std::to_string(need));

    FeatureMatrix m;
    m.data.resize(static_cast<Index>(rows), static_cast<Index>(cols));
    std::size_t off = kFmxHeaderBytes;
    for (std::uint64_t i = 0; i < rows; ++i)
        for (std::uint32_t j = 0; j < cols; ++j, off += 8)
            m.data(static_cast<Index>(i), static_cast<Index>(j)) = get_f64(bytes, off);
    if (labelled) {
        std::vector<ClassId> labels(rows);
        for (std::uint64_t i = 0; i < rows; ++i, off += 4)
            labels[i] = get_u32(bytes, off);
        m.labels = std::move(labels);
    }
    return m;
}

namespace {

std::string format_double(double v)
{
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::vector<std::string_view> split_commas(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos)
            break;
        start = pos + 1;
    }
    for (auto& f : out) {
        while (!f.empty() && (f.front() == ' ' || f.front() == '\t'))
            f.remove_prefix(1);
        while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r'))
            f.remove_suffix(1);
    }
    return out;
}

} // namespace

std::string encode_csv(const FeatureMatrix& m)
{
    m.validate();
    std::string out;
    if (m.has_labels())
        out += "label,";
    for (Index j = 0; j < m.cols(); ++j) {
        out += "f" + std::to_string(j);
        out += (j + 1 < m.cols()) ? "," : "\n";
    }
    for (Index i = 0; i < m.rows(); ++i) {
        if (m.has_labels())
            out += std::to_string((*m.labels)[static_cast<std::size_t>(i)]) + ",";
        for (Index j = 0; j < m.cols(); ++j) {
            out += format_double(m.data(i, j));
            out += (j + 1 < m.cols()) ? "," : "\n";
        }
    }
    return out;
}

FeatureMatrix decode_csv(std::string_view text)
{
    std::size_t pos = 0;
    std::size_t line_no = 0;
    auto next_line = [&](std::string_view& line, std::size_t& line_start) {
        while (pos < text.size()) {
            line_start = pos;
            auto end = text.find('\n', pos);
            if (end == std::string_view::npos)
                end = text.size();
            line = text.substr(pos, end - pos);
            pos = end + 1;
            ++line_no;
            if (!line.empty() && line.back() == '\r')
                line.remove_suffix(1);
            if (line.find_first_not_of(" \t") != std::string_view::npos)
                return true;
        }
        return false;
    };

    std::string_view line;
    std::size_t line_start = 0;
    if (!next_line(line, line_start))
        throw InputError("CSV: zero rows (empty input)");
    const auto header = split_commas(line);
    const bool labelled = header.front() == "label";
    const std::size_t cols = header.size() - (labelled ? 1 : 0);
    if (cols == 0)
        throw InputError("CSV: header has no feature columns (line 1, byte offset 0)");

    std::vector<double> values;
    std::vector<ClassId> labels;
    std::size_t rows = 0;
    while (next_line(line, line_start)) {
        const auto fields = split_commas(line);
        if (fields.size() != header.size())
            throw InputError("CSV: line " + std::to_string(line_no) + " (byte offset " +
                             std::to_string(line_start) + ") has " + std::to_string(fields.size()) +
                             " fields, header has " + std::to_string(header.size()));
        std::size_t f = 0;
        auto fail = [&](std::string_view field, const char* what) {
            const std::size_t offset = static_cast<std::size_t>(field.data() - text.data());
            return InputError("CSV: " + std::string(what) + " '" + std::string(field) + "' on line " +
                              std::to_string(line_no) + " at byte offset " + std::to_string(offset));
        };
        if (labelled) {
            ClassId l = 0;
            auto [p, ec] = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), l);
            if (ec != std::errc() || p != fields[0].data() + fields[0].size())
                throw fail(fields[0], "invalid label");
            labels.push_back(l);
            f = 1;
        }
        for (; f < fields.size(); ++f) {
            double v = 0.0;
            auto [p, ec] = std::from_chars(fields[f].data(), fields[f].data() + fields[f].size(), v);
            if (ec != std::errc() || p != fields[f].data() + fields[f].size() || fields[f].empty())
                throw fail(fields[f], "invalid number");
            values.push_back(v);
        }
        ++rows;
    }

    FeatureMatrix m;
    m.data = Eigen::Map<RowMatrix>(values.data(), static_cast<Index>(rows), static_cast<Index>(cols));
    if (labelled)
        m.labels = std::move(labels);
    return m;
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InputError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, std::string_view bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw InputError("cannot open '" + path + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw InputError("write to '" + path + "' failed");
}

FeatureMatrix read_features(const std::string& path)
{
    const std::string bytes = read_file(path);
    if (bytes.empty())
        throw InputError("'" + path + "': zero rows (empty file)");
    if (bytes.size() >= 4 && std::string_view(bytes).substr(0, 4) == "FMX1")
        return decode_fmx(bytes);
    return decode_csv(bytes);
}

void write_fmx(const std::string& path, const FeatureMatrix& m)
{
    write_file(path, encode_fmx(m));
}

void write_csv(const std::string& path, const FeatureMatrix& m)
{
    write_file(path, encode_csv(m));
}

} // namespace lrgda
