#pragma once
// Helpers shared by the unit suites: frozen oracle values and scratch directories.

#include "json.hpp"
#include "rpe/common.hpp"

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace rpe::test {

inline const nlohmann::json& oracle() {
    static const nlohmann::json data = [] {
        std::ifstream in(RPE_ORACLE_FILE);
        if (!in) throw std::runtime_error("missing oracle file " RPE_ORACLE_FILE);
        return nlohmann::json::parse(in);
    }();
    return data;
}

inline std::vector<double> doubles(const nlohmann::json& j) { return j.get<std::vector<double>>(); }

// Removed with everything inside when it goes out of scope.
class ScratchDir {
public:
    explicit ScratchDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("rpe-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace rpe::test
