#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "stfl/harness.hpp"

using namespace stfl;

TEST_SUITE("convergence") {

// Capable configurations must end below 5% of their first-epoch error and
// incapable ones must stay above it, both with three standard errors of room.
TEST_CASE("capability predicts convergence across a grid of outage rates and step sizes") {
    const double qs[] = {0.0, 0.2, 0.4, 0.6, 0.9};
    const double alphas[] = {0.05, 0.15, 0.25, 0.4, 0.5};
    for (double q : qs) {
        for (double alpha : alphas) {
            ExperimentConfig c;
            c.q = q;
            c.alpha.value = alpha;
            c.replicates = 20;
            c.seed = 11;
            const RunResult r = run_experiment(c);
            c.delta = r.delta.unbounded ? 1e300 : r.delta.value;
            const bool capable = theory_report(c).verdict == Verdict::capable;

            const double first = r.trace.at_epoch(1).avg_error;
            const auto& last = r.trace.at_epoch(c.epochs);
            const double target = 0.05 * first;
            char label[160];
            std::snprintf(label, sizeof label, "q=%.2f alpha=%.2f delta=%.3g %s: eps_last=%.4g se=%.3g target=%.4g", q,
                          alpha, c.delta, capable ? "capable" : "incapable", last.avg_error, last.std_error, target);
            INFO(label);
            if (capable) {
                CHECK(last.avg_error + 3.0 * last.std_error < target);
            } else {
                CHECK(last.avg_error - 3.0 * last.std_error >= target);
            }
        }
    }
}

}
