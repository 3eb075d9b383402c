#pragma once

#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "simcore/embedding.hpp"
#include "simcore/rng.hpp"

namespace test_util {

inline simcore::EmbeddingMatrix random_matrix(std::uint64_t seed, std::size_t count,
                                              std::size_t dim) {
    auto gen = simcore::rng::engine(seed);
    simcore::rng::Gaussian gauss;
    std::vector<float> data(count * dim);
    for (auto& v : data) v = static_cast<float>(gauss(gen));
    return simcore::EmbeddingMatrix(count, dim, std::move(data), false);
}

inline simcore::EmbeddingMatrix random_unit_matrix(std::uint64_t seed, std::size_t count,
                                                   std::size_t dim) {
    return simcore::l2_normalize(random_matrix(seed, count, dim));
}

// Fresh scratch directory under the system temp root.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        root_ = std::filesystem::temp_directory_path() /
                ("simcore_test_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::create_directories(root_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(root_, ec);
    }
    std::string path(const std::string& name) const { return (root_ / name).string(); }

private:
    std::filesystem::path root_;
};

}  // namespace test_util
