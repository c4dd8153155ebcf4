#include "sseg/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sseg/error.hpp"

namespace sseg {

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        size_t start = 0;
        while (true) {
            const size_t comma = line.find(',', start);
            if (comma == std::string::npos) {
                cells.push_back(line.substr(start));
                break;
            }
            cells.push_back(line.substr(start, comma - start));
            start = comma + 1;
        }
        rows.push_back(std::move(cells));
    }
    return rows;
}

TrainLog parse_train_log_csv(const std::string& text) {
    const auto rows = parse_csv(text);
    if (rows.empty() || rows.front() != std::vector<std::string>{"epoch", "lr", "mean_loss"})
        throw ParseError("not a train log CSV");
    TrainLog log;
    for (size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != 3) throw ParseError("train log row has wrong arity");
        try {
            log.entries.push_back(
                {std::stoi(rows[i][0]), std::stod(rows[i][1]), std::stod(rows[i][2])});
        } catch (const std::exception&) {
            throw ParseError("train log row is not numeric");
        }
    }
    return log;
}

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

const char* kCurveColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

}  // namespace

std::string render_loss_curves_svg(const std::vector<std::pair<std::string, TrainLog>>& curves) {
    const double width = 720, height = 440;
    const double ml = 64, mr = 160, mt = 24, mb = 48;  // margins; legend on the right
    const double pw = width - ml - mr, ph = height - mt - mb;

    int max_epoch = 1;
    double lo = 0.0, hi = 1e-12;
    bool any = false;
    for (const auto& [name, log] : curves)
        for (const auto& e : log.entries) {
            max_epoch = std::max(max_epoch, e.epoch);
            hi = any ? std::max(hi, e.mean_loss) : e.mean_loss;
            lo = any ? std::min(lo, e.mean_loss) : e.mean_loss;
            any = true;
        }
    if (!any) throw ConfigError("no curves to plot");
    if (hi - lo < 1e-12) hi = lo + 1e-12;

    auto px = [&](double epoch) { return ml + pw * (max_epoch ? epoch / max_epoch : 0.0); };
    auto py = [&](double loss) { return mt + ph * (1.0 - (loss - lo) / (hi - lo)); };

    std::ostringstream svg;
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
        << "' viewBox='0 0 " << width << " " << height << "'>\n"
        << "<rect width='100%' height='100%' fill='white'/>\n"
        << "<g font-family='sans-serif' font-size='12'>\n";

    // Axes and ticks
    svg << "<line x1='" << ml << "' y1='" << mt + ph << "' x2='" << ml + pw << "' y2='" << mt + ph
        << "' stroke='black'/>\n"
        << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << mt + ph
        << "' stroke='black'/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double fx = i / 5.0;
        const double x = ml + pw * fx;
        svg << "<line x1='" << x << "' y1='" << mt + ph << "' x2='" << x << "' y2='" << mt + ph + 4
            << "' stroke='black'/>\n"
            << "<text x='" << x << "' y='" << mt + ph + 18 << "' text-anchor='middle'>"
            << fmt(fx * max_epoch) << "</text>\n";
        const double y = mt + ph * (1.0 - fx);
        svg << "<line x1='" << ml - 4 << "' y1='" << y << "' x2='" << ml << "' y2='" << y
            << "' stroke='black'/>\n"
            << "<text x='" << ml - 8 << "' y='" << y + 4 << "' text-anchor='end'>"
            << fmt(lo + fx * (hi - lo)) << "</text>\n";
    }
    svg << "<text x='" << ml + pw / 2 << "' y='" << height - 10
        << "' text-anchor='middle'>epoch</text>\n"
        << "<text x='16' y='" << mt + ph / 2 << "' text-anchor='middle' transform='rotate(-90 16 "
        << mt + ph / 2 << ")'>mean loss per voxel</text>\n";

    // Curves and legend
    size_t ci = 0;
    for (const auto& [name, log] : curves) {
        const char* color = kCurveColors[ci % (sizeof kCurveColors / sizeof *kCurveColors)];
        svg << "<polyline fill='none' stroke='" << color << "' stroke-width='1.5' points='";
        for (const auto& e : log.entries) svg << px(e.epoch) << "," << py(e.mean_loss) << " ";
        svg << "'/>\n";
        const double ly = mt + 16 + 18 * static_cast<double>(ci);
        svg << "<line x1='" << ml + pw + 12 << "' y1='" << ly - 4 << "' x2='" << ml + pw + 36
            << "' y2='" << ly - 4 << "' stroke='" << color << "' stroke-width='1.5'/>\n"
            << "<text x='" << ml + pw + 42 << "' y='" << ly << "'>" << xml_escape(name)
            << "</text>\n";
        ++ci;
    }
    svg << "</g>\n</svg>\n";
    return svg.str();
}

std::string render_table_svg(const std::vector<std::vector<std::string>>& rows,
                             const std::string& title) {
    if (rows.empty()) throw ConfigError("no table rows to render");
    size_t cols = 0;
    for (const auto& r : rows) cols = std::max(cols, r.size());
    std::vector<size_t> width(cols, 0);
    for (const auto& r : rows)
        for (size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());

    const double char_w = 7.5, row_h = 20, pad = 12;
    std::vector<double> x(cols + 1, pad);
    for (size_t c = 0; c < cols; ++c) x[c + 1] = x[c] + char_w * static_cast<double>(width[c] + 2);
    const double total_w = x[cols] + pad;
    const double total_h = pad + row_h * static_cast<double>(rows.size() + 1) + pad;

    std::ostringstream svg;
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << total_w << "' height='" << total_h
        << "' viewBox='0 0 " << total_w << " " << total_h << "'>\n"
        << "<rect width='100%' height='100%' fill='white'/>\n"
        << "<g font-family='monospace' font-size='13'>\n"
        << "<text x='" << pad << "' y='" << pad + 4 << "' font-weight='bold'>" << xml_escape(title)
        << "</text>\n";
    for (size_t r = 0; r < rows.size(); ++r) {
        const double y = pad + row_h * static_cast<double>(r + 1) + 4;
        const char* weight = r == 0 ? " font-weight='bold'" : "";
        for (size_t c = 0; c < rows[r].size(); ++c)
            svg << "<text x='" << x[c] << "' y='" << y << "'" << weight << ">"
                << xml_escape(rows[r][c]) << "</text>\n";
    }
    const double line_y = pad + row_h + 8;
    svg << "<line x1='" << pad << "' y1='" << line_y << "' x2='" << total_w - pad << "' y2='"
        << line_y << "' stroke='black'/>\n"
        << "</g>\n</svg>\n";
    return svg.str();
}

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw IoError("cannot open: " + p.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void spit(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p);
    if (!out) throw IoError("cannot write: " + p.string());
    out << text;
}

}  // namespace

std::vector<std::filesystem::path> write_report(const std::filesystem::path& run_dir,
                                                const std::filesystem::path& out_dir) {
    if (!std::filesystem::is_directory(run_dir))
        throw IoError("run directory does not exist: " + run_dir.string());
    std::filesystem::create_directories(out_dir);
    std::vector<std::filesystem::path> written;

    // Loss curves: every train_log*.csv in the tree, grouped by directory.
    std::vector<std::filesystem::path> logs;
    std::vector<std::filesystem::path> tables;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(run_dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string name = entry.path().filename().string();
        if (name.rfind("train_log", 0) == 0 && entry.path().extension() == ".csv")
            logs.push_back(entry.path());
        else if ((name == "crossval.csv" || name.rfind("metrics", 0) == 0) &&
                 entry.path().extension() == ".csv")
            tables.push_back(entry.path());
    }
    std::sort(logs.begin(), logs.end());
    std::sort(tables.begin(), tables.end());

    if (!logs.empty()) {
        std::vector<std::pair<std::string, TrainLog>> curves;
        for (const auto& p : logs)
            curves.emplace_back(std::filesystem::relative(p, run_dir).string(),
                                parse_train_log_csv(slurp(p)));
        const auto out = out_dir / "loss_curves.svg";
        spit(out, render_loss_curves_svg(curves));
        written.push_back(out);
    }
    for (const auto& p : tables) {
        const auto rows = parse_csv(slurp(p));
        if (rows.empty()) continue;
        std::string stem = std::filesystem::relative(p, run_dir).string();
        for (char& c : stem)
            if (c == '/' || c == '\\') c = '_';
        stem.resize(stem.size() - 4);  // drop .csv
        const auto out = out_dir / (stem + ".svg");
        spit(out, render_table_svg(rows, stem));
        written.push_back(out);
    }
    if (written.empty()) throw ConfigError("nothing to report in " + run_dir.string());
    return written;
}

}  // namespace sseg
