#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <vector>

#include "cdslab/parallel.hpp"

using namespace cdslab;

TEST_CASE("worker count honours the environment cap") {
    setenv("CDSLAB_THREADS", "3", 1);
    CHECK(worker_count() == 3);
    setenv("CDSLAB_THREADS", "junk", 1);
    CHECK(worker_count() >= 1);
    unsetenv("CDSLAB_THREADS");
    CHECK(worker_count() >= 1);
}

TEST_CASE("parallel_for visits every index exactly once") {
    setenv("CDSLAB_THREADS", "4", 1);
    std::vector<std::atomic<int>> hits(1000);
    parallel_for(hits.size(), [&](std::size_t i) { ++hits[i]; });
    for (const auto& h : hits) CHECK(h.load() == 1);
    unsetenv("CDSLAB_THREADS");
}

TEST_CASE("the lowest failing index wins") {
    setenv("CDSLAB_THREADS", "4", 1);
    try {
        parallel_for(100, [](std::size_t i) {
            if (i == 17 || i == 80) throw std::runtime_error(std::to_string(i));
        });
        FAIL("expected an exception");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()) == "17");
    }
    unsetenv("CDSLAB_THREADS");
}

TEST_CASE("empty range is a no-op") {
    int calls = 0;
    parallel_for(0, [&](std::size_t) { ++calls; });
    CHECK(calls == 0);
}
