#pragma once

#include <string>
#include <vector>

namespace ostb {

// One evaluation row, aggregated over repeated train+eval runs.
struct EvalRow {
    int n_train = 0;
    int n_test = 0;
    std::string architecture;    // conv | residual | nearest_neighbor | random
    std::string representation;  // scalogram | spectrogram
    int runs = 1;
    int trials = 0;
    double max_acc = 0.0;
    double mean_acc = 0.0;
};

void validate_row(const EvalRow& row);

// Columns: n_train,n_test,architecture,representation,runs,trials,max_acc,mean_acc
void write_eval_csv(const std::string& path, const std::vector<EvalRow>& rows);
std::vector<EvalRow> read_eval_csv(const std::string& path);

// Text grid grouped by (n_train, n_test), columns architecture x
// representation x {max, mean}; baseline rows are listed below the grid.
std::string render_table(const std::vector<EvalRow>& rows);

// Horizontal bar chart of max accuracies per method (network vs baselines).
void write_bar_chart_png(const std::string& path, const std::vector<EvalRow>& rows);

}  // namespace ostb
