// Random charges in the square: FMM potentials against the direct sum for a
// range of expansion orders.
//
//   fmm_demo [n]

#include <chrono>
#include <cstdio>
#include <cstdlib>

#include <fmmpc/fmmpc.hpp>

int main(int argc, char **argv)
{
    using namespace fmmpc;
    using clock = std::chrono::steady_clock;
    const std::size_t n = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 20000;
    const auto sources = bench::random_sources(n, 1);
    const auto targets = bench::random_points(n, 2);

    auto t0 = clock::now();
    const auto exact = direct_evaluate(sources, targets, 0.0);
    std::printf("direct: %.3f s\n", std::chrono::duration<double>(clock::now() - t0).count());

    std::printf("%5s %12s %10s %8s %8s\n", "p", "rel_l2", "time_s", "m2l", "p2p");
    for (int p = 2; p <= 12; p += 2) {
        FmmConfig c;
        c.order = p;
        std::vector<Point2> pos;
        std::vector<double> q;
        for (const auto &s : sources) {
            pos.push_back(s.position);
            q.push_back(s.strength);
        }
        t0 = clock::now();
        const FmmEvaluator ev(pos, targets, c);
        const auto u = ev.evaluate(q);
        const double t = std::chrono::duration<double>(clock::now() - t0).count();
        std::printf("%5d %12.3e %10.3f %8zu %8zu\n", p, bench::relative_l2(u, exact), t, ev.stats().m2l_pairs,
                    ev.stats().p2p_pairs);
    }
}
