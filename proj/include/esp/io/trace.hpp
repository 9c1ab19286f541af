#pragma once

#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>

#include "esp/error.hpp"
#include "esp/solver.hpp"

namespace esp::io {

inline constexpr const char* kTraceHeader = "iter,energy,u_change,ortho_residual,x0,y0,a,b,theta";

/// One header line then one row per record; reals use 17 significant digits.
inline void write_trace_csv(std::ostream& out, const IterationTrace& trace) {
    out << kTraceHeader << '\n';
    char buf[512];
    for (const auto& r : trace) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.iter, r.energy,
                      r.u_change, r.ortho_residual, r.ellipse.x0, r.ellipse.y0, r.ellipse.a, r.ellipse.b,
                      r.ellipse.theta);
        out << buf;
    }
}

inline void write_trace_csv(const std::string& path, const IterationTrace& trace) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    write_trace_csv(out, trace);
    if (!out) throw IoError("write failed: " + path);
}

} // namespace esp::io
