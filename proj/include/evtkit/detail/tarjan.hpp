#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

namespace evtkit::detail {

/// Iterative Tarjan. `successors(v, f)` must call f(w) for every edge v -> w. Returns the
/// components in topological order (a component precedes everything it can reach), members
/// ascending.
template <typename Successors>
std::vector<std::vector<std::size_t>> strongly_connected_components(std::size_t n, Successors&& successors) {
    constexpr std::size_t kUnvisited = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> index(n, kUnvisited);
    std::vector<std::size_t> low(n, 0);
    std::vector<bool> on_stack(n, false);
    std::vector<std::size_t> stack;
    std::vector<std::vector<std::size_t>> completed;
    std::size_t next_index = 0;

    struct Frame {
        std::size_t v;
        std::vector<std::size_t> succ;
        std::size_t pos;
    };
    std::vector<Frame> call;

    auto open = [&](std::size_t v) {
        index[v] = low[v] = next_index++;
        stack.push_back(v);
        on_stack[v] = true;
        Frame f{v, {}, 0};
        successors(v, [&](std::size_t w) { f.succ.push_back(w); });
        call.push_back(std::move(f));
    };

    for (std::size_t root = 0; root < n; ++root) {
        if (index[root] != kUnvisited) continue;
        open(root);
        while (!call.empty()) {
            Frame& f = call.back();
            if (f.pos < f.succ.size()) {
                std::size_t w = f.succ[f.pos++];
                if (index[w] == kUnvisited) {
                    open(w);
                } else if (on_stack[w]) {
                    low[f.v] = std::min(low[f.v], index[w]);
                }
                continue;
            }
            std::size_t v = f.v;
            call.pop_back();
            if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
            if (low[v] == index[v]) {
                std::vector<std::size_t> component;
                std::size_t w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[w] = false;
                    component.push_back(w);
                } while (w != v);
                std::sort(component.begin(), component.end());
                completed.push_back(std::move(component));
            }
        }
    }
    std::reverse(completed.begin(), completed.end());
    return completed;
}

}  // namespace evtkit::detail
