#include "cdslab/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cdslab/errors.hpp"
#include "cdslab/rng.hpp"

namespace cdslab {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
    return buf;
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {
    if (header_.empty()) throw InputError("csv header must not be empty");
}

CsvTable& CsvTable::add(std::vector<std::string> row) {
    if (row.size() != header_.size()) throw ShapeError("csv row width differs from header");
    rows_.push_back(std::move(row));
    return *this;
}

std::string CsvTable::str() const {
    std::string out;
    auto line = [&out](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            out += cells[i];
        }
        out += '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return out;
}

nlohmann::ordered_json jsonl_record() {
    nlohmann::ordered_json j;
    j["schema_version"] = kSchemaVersion;
    return j;
}

nlohmann::ordered_json to_json_array(const Vector& v) {
    auto out = nlohmann::ordered_json::array();
    for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

void JsonlWriter::add(const nlohmann::ordered_json& record) {
    buf_ += record.dump();
    buf_ += '\n';
}

OutputSink::OutputSink(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create output directory " + dir_.string() + ": " + ec.message());
}

std::filesystem::path OutputSink::write(const std::string& name, std::string_view content) {
    const std::filesystem::path target = dir_ / name; // an absolute name replaces dir_
    if (target.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(target.parent_path(), ec);
        if (ec) throw IoError("cannot create directory " + target.parent_path().string());
    }
    std::ofstream out(target, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + target.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.close();
    if (!out) throw IoError("failed writing " + target.string());
    files_.push_back({name, content.size(), fnv1a64(content.data(), content.size())});
    return target;
}

void OutputSink::write_manifest(std::string_view subcommand, const std::filesystem::path& config_path,
                                std::uint64_t config_hash, std::uint64_t seed) {
    nlohmann::ordered_json m;
    m["schema_version"] = kSchemaVersion;
    m["subcommand"] = subcommand;
    m["config"] = config_path.string();
    m["config_hash"] = hex64(config_hash);
    m["seed"] = seed;
    auto files = nlohmann::ordered_json::array();
    for (const auto& f : files_) {
        files.push_back({{"name", f.name}, {"bytes", f.bytes}, {"fnv1a", hex64(f.hash)}});
    }
    m["files"] = std::move(files);
    const std::string text = m.dump(2) + "\n";
    std::ofstream out(dir_ / "manifest.json", std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write manifest in " + dir_.string());
    out << text;
    if (!out) throw IoError("failed writing manifest in " + dir_.string());
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace cdslab
