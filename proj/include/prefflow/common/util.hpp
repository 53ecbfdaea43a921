#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace prefflow {

struct PrefflowError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Configuration / usage problems map to exit code 1, everything else to 2.
struct ConfigError : PrefflowError {
    using PrefflowError::PrefflowError;
};

// Shortest round-trip decimal representation; stable across runs of the
// same binary, which is what the byte-reproducibility contracts need.
std::string fmt_double(double value);

// Half-up (away from zero) rounding to a fixed number of decimals.
double round_half_up(double value, int decimals);

bool all_finite(std::span<const double> values);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);
void ensure_dir(const std::filesystem::path& dir);

// Runs fn(0..n-1) on up to `threads` workers. Tasks must write only to
// their own output slots; iteration order is unspecified.
void parallel_for(size_t n, unsigned threads, const std::function<void(size_t)>& fn);

// Line-oriented CSV writer that flushes on demand (post-training appends a
// row per iteration and must survive interruption mid-run).
class CsvWriter {
  public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
    void row(const std::vector<std::string>& fields);
    void flush();

  private:
    std::ofstream out_;
};

}  // namespace prefflow
