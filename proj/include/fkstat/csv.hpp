#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fkstat/errors.hpp"

namespace fkstat {

// CSV file whose first line records the config hash and base seed, so every
// output can be traced back to the exact run that produced it. Numbers are
// written with 17 significant digits: reruns must be byte-identical.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, std::uint64_t config_hash,
              std::uint64_t base_seed) {
        std::filesystem::create_directories(path.parent_path());
        out_.open(path, std::ios::binary | std::ios::trunc);
        if (!out_) throw ConfigError("cannot open output file: " + path.string());
        char line[80];
        std::snprintf(line, sizeof line, "# config_hash=%016llx base_seed=%llu\n",
                      static_cast<unsigned long long>(config_hash),
                      static_cast<unsigned long long>(base_seed));
        out_ << line;
    }

    void header(const std::vector<std::string>& columns) {
        for (std::size_t i = 0; i < columns.size(); ++i)
            out_ << (i ? "," : "") << columns[i];
        out_ << "\n";
    }

    void field(const std::string& s) {
        if (!first_) out_ << ",";
        out_ << s;
        first_ = false;
    }

    void field(double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        field(std::string(buf));
    }

    void field(std::uint64_t v) { field(std::to_string(v)); }
    void field(int v) { field(std::to_string(v)); }

    void end_row() {
        out_ << "\n";
        first_ = true;
    }

private:
    std::ofstream out_;
    bool first_ = true;
};

}  // namespace fkstat
