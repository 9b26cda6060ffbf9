#include "evtrack/config_search.hpp"

#include <algorithm>
#include <cmath>

namespace evtrack {

std::vector<Candidate> search_configs(const BudgetTargets& t, const SearchSpace& s, const HardwareConfig& hw) {
    std::vector<Candidate> out;
    for (int c1 : s.widths)
        for (int c2 : s.widths)
            for (int c3 : s.widths)
                for (int hid : s.widths) {
                    if (hid < s.min_hidden) continue;
                    for (int st : s.stem_strides) {
                        BackboneDims d{c1, c2, c3, hid, st, true};
                        const ModelConfig cfg = make_model_config(d);
                        const int64_t p = total_params(cfg);
                        const int64_t m = total_macs(cfg);
                        const double dp = std::abs(double(p - t.params)) / double(t.params);
                        const double dm = std::abs(double(m - t.macs)) / double(t.macs);
                        if (dp > t.tolerance || dm > t.tolerance) continue;
                        bool fits = true;
                        for (size_t i = 0; i < cfg.layers.size() && fits; ++i)
                            fits = activation_working_set(cfg, i) <= hw.mem.act_sram;
                        if (!fits) continue;
                        out.push_back(Candidate{d, p, m, dp + dm});
                    }
                }
    std::stable_sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) { return a.score < b.score; });
    return out;
}

}  // namespace evtrack
