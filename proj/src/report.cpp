#include "ostb/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "ostb/errors.hpp"
#include "ostb/image_io.hpp"

namespace ostb {

void validate_row(const EvalRow& row) {
    if (row.n_train < 0 || row.n_test < 0) throw DataError("EvalRow: negative split sizes");
    if (row.runs < 1) throw DataError("EvalRow: runs must be >= 1");
    if (row.trials < 1) throw DataError("EvalRow: trials must be >= 1");
    if (row.max_acc < 0.0 || row.max_acc > 1.0 || row.mean_acc < 0.0 || row.mean_acc > 1.0)
        throw DataError("EvalRow: accuracies must lie in [0,1]");
    if (row.mean_acc > row.max_acc + 1e-12) throw DataError("EvalRow: mean accuracy exceeds max");
    if (row.architecture.empty() || row.representation.empty())
        throw DataError("EvalRow: missing architecture/representation");
}

void write_eval_csv(const std::string& path, const std::vector<EvalRow>& rows) {
    if (rows.empty()) throw DataError("write_eval_csv: no rows");
    for (const auto& r : rows) validate_row(r);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("write_eval_csv: cannot open " + path);
    out << "n_train,n_test,architecture,representation,runs,trials,max_acc,mean_acc\n";
    char buf[192];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%s,%s,%d,%d,%.6f,%.6f\n", r.n_train, r.n_test,
                      r.architecture.c_str(), r.representation.c_str(), r.runs, r.trials, r.max_acc,
                      r.mean_acc);
        out << buf;
    }
    if (!out) throw DataError("write_eval_csv: write failed for " + path);
}

std::vector<EvalRow> read_eval_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("read_eval_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("read_eval_csv: empty file " + path);

    std::vector<EvalRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 8) throw DataError("read_eval_csv: malformed line: " + line);
        EvalRow r;
        r.n_train = std::stoi(fields[0]);
        r.n_test = std::stoi(fields[1]);
        r.architecture = fields[2];
        r.representation = fields[3];
        r.runs = std::stoi(fields[4]);
        r.trials = std::stoi(fields[5]);
        r.max_acc = std::stod(fields[6]);
        r.mean_acc = std::stod(fields[7]);
        validate_row(r);
        rows.push_back(r);
    }
    if (rows.empty()) throw DataError("read_eval_csv: no rows in " + path);
    return rows;
}

namespace {

std::string pct(double v) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.0f%%", 100.0 * v);
    return buf;
}

bool is_network(const std::string& arch) { return arch == "conv" || arch == "residual"; }

}  // namespace

std::string render_table(const std::vector<EvalRow>& rows) {
    if (rows.empty()) throw DataError("render_table: no rows");
    for (const auto& r : rows) validate_row(r);

    const std::vector<std::string> archs = {"conv", "residual"};
    const std::vector<std::string> reprs = {"scalogram", "spectrogram"};

    std::map<std::pair<int, int>, std::map<std::pair<std::string, std::string>, const EvalRow*>> grid;
    std::vector<const EvalRow*> baselines;
    for (const auto& r : rows) {
        if (is_network(r.architecture))
            grid[{r.n_train, r.n_test}][{r.architecture, r.representation}] = &r;
        else
            baselines.push_back(&r);
    }

    std::ostringstream out;
    out << "One-shot accuracy (max / mean over repeated runs)\n\n";
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-8s %-8s", "Train", "Test");
    out << buf;
    for (const auto& a : archs)
        for (const auto& rp : reprs) {
            std::snprintf(buf, sizeof(buf), " | %-9s %-11s", a.c_str(), rp.c_str());
            out << buf;
        }
    out << "\n";
    std::snprintf(buf, sizeof(buf), "%-8s %-8s", "sets", "sets");
    out << buf;
    for (std::size_t i = 0; i < archs.size() * reprs.size(); ++i) {
        std::snprintf(buf, sizeof(buf), " | %-9s %-11s", "max", "mean");
        out << buf;
    }
    out << "\n";
    out << std::string(22 + 26 * archs.size() * reprs.size(), '-') << "\n";

    for (const auto& [split, cells] : grid) {
        std::snprintf(buf, sizeof(buf), "%-8d %-8d", split.first, split.second);
        out << buf;
        for (const auto& a : archs)
            for (const auto& rp : reprs) {
                auto it = cells.find({a, rp});
                if (it != cells.end()) {
                    std::snprintf(buf, sizeof(buf), " | %-9s %-11s", pct(it->second->max_acc).c_str(),
                                  pct(it->second->mean_acc).c_str());
                } else {
                    std::snprintf(buf, sizeof(buf), " | %-9s %-11s", "-", "-");
                }
                out << buf;
            }
        out << "\n";
    }

    if (!baselines.empty()) {
        out << "\nBaselines\n";
        for (const EvalRow* r : baselines) {
            std::snprintf(buf, sizeof(buf), "  %-18s %-12s (%d/%d split): max %s, mean %s\n",
                          r->architecture.c_str(), r->representation.c_str(), r->n_train, r->n_test,
                          pct(r->max_acc).c_str(), pct(r->mean_acc).c_str());
            out << buf;
        }
    }
    return out.str();
}

void write_bar_chart_png(const std::string& path, const std::vector<EvalRow>& rows) {
    if (rows.empty()) throw DataError("write_bar_chart_png: no rows");

    // Aggregate best accuracy per (architecture, representation).
    std::map<std::string, double> best;
    for (const auto& r : rows) {
        const std::string key = r.architecture + " / " + r.representation;
        best[key] = std::max(best[key], r.max_acc);
    }

    const int side = 224;  // reuse the grayscale image writer
    TfrImage img;
    img.side = side;
    img.kind = "chart";
    img.gray.assign(static_cast<std::size_t>(side) * side, 1.0f);

    const int n = static_cast<int>(best.size());
    const int band = side / std::max(1, n);
    int row = 0;
    for (const auto& [key, acc] : best) {
        (void)key;
        const int y0 = row * band + band / 4;
        const int y1 = row * band + (3 * band) / 4;
        const int len = static_cast<int>(std::lround(acc * (side - 20)));
        for (int y = y0; y < y1 && y < side; ++y)
            for (int x = 10; x < 10 + len && x < side; ++x)
                img.gray[static_cast<std::size_t>(y) * side + x] = 0.2f;
        ++row;
    }
    write_png(path, img);
}

}  // namespace ostb
