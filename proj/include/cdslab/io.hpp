#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cdslab/types.hpp"

namespace cdslab {

inline constexpr int kSchemaVersion = 1;

/// %.17g; round-trips every finite double.
std::string format_double(double v);

std::string hex64(std::uint64_t v);

/// In-memory CSV with a fixed header; rows must match the header width.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header);

    CsvTable& add(std::vector<std::string> row);
    std::size_t rows() const noexcept { return rows_.size(); }
    std::string str() const;

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

/// Appends a "schema_version" field first, then the caller's fields in order.
nlohmann::ordered_json jsonl_record();

nlohmann::ordered_json to_json_array(const Vector& v);

/// Accumulates JSONL lines.
class JsonlWriter {
public:
    void add(const nlohmann::ordered_json& record);
    const std::string& str() const noexcept { return buf_; }

private:
    std::string buf_;
};

/// Writes run outputs under one directory and records them for the manifest.
class OutputSink {
public:
    /// Creates `dir` if needed. IoError on failure.
    explicit OutputSink(std::filesystem::path dir);

    const std::filesystem::path& dir() const noexcept { return dir_; }

    /// Writes (replacing) `name` relative to dir, or an absolute path as given.
    std::filesystem::path write(const std::string& name, std::string_view content);

    struct Entry {
        std::string name;
        std::uint64_t bytes = 0;
        std::uint64_t hash = 0;
    };
    const std::vector<Entry>& files() const noexcept { return files_; }

    /// manifest.json: schema_version, subcommand, config path and hash, seed, produced files.
    void write_manifest(std::string_view subcommand, const std::filesystem::path& config_path,
                        std::uint64_t config_hash, std::uint64_t seed);

private:
    std::filesystem::path dir_;
    std::vector<Entry> files_;
};

std::string read_file(const std::filesystem::path& path);

} // namespace cdslab
