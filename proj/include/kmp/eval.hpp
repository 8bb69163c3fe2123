#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "kmp/common.hpp"

namespace kmp {

inline double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels,
                       const std::vector<int>& ids) {
    if (ids.empty()) throw contract_error("accuracy: empty id set");
    int correct = 0;
    for (int id : ids) {
        if (id < 0 || id >= static_cast<int>(predictions.size()) ||
            id >= static_cast<int>(labels.size()))
            throw contract_error("accuracy: id out of range");
        if (predictions[id] == labels[id]) ++correct;
    }
    return static_cast<double>(correct) / ids.size();
}

struct Aggregate {
    double mean = 0.0;
    double stddev = 0.0;  // sample (n-1)
    int n = 0;
};

inline Aggregate aggregate(const std::vector<double>& values) {
    if (values.empty()) throw contract_error("aggregate: no values");
    Aggregate a;
    a.n = static_cast<int>(values.size());
    for (double v : values) a.mean += v;
    a.mean /= a.n;
    if (a.n >= 2) {
        double ss = 0.0;
        for (double v : values) ss += (v - a.mean) * (v - a.mean);
        a.stddev = std::sqrt(ss / (a.n - 1));
    }
    return a;
}

// "mean±std" in percent, two decimals: (0.7903, 0.0119) -> "79.03±1.19"
inline std::string format_mean_std(double mean, double stddev) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f±%.2f", mean * 100.0, stddev * 100.0);
    return buf;
}

struct RunRecord {
    std::string dataset;
    std::string teacher;
    std::string method;
    std::string setting;  // trans | induc, or a sweep point like "noise=0.3"
    std::uint64_t seed = 0;
    double test_acc = 0.0;
    double val_acc = 0.0;
    int epochs = 0;
    double seconds = 0.0;
};

inline const char* kMetricsHeader = "dataset,teacher,method,setting,seed,test_acc,val_acc,epochs,seconds";

inline std::string metrics_row(const RunRecord& r) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s,%s,%s,%s,%llu,%.6f,%.6f,%d,%.3f", r.dataset.c_str(),
                  r.teacher.c_str(), r.method.c_str(), r.setting.c_str(),
                  static_cast<unsigned long long>(r.seed), r.test_acc, r.val_acc, r.epochs, r.seconds);
    return buf;
}

inline RunRecord parse_metrics_row(const std::string& line) {
    RunRecord r;
    std::vector<std::string> parts;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(cur);
    if (parts.size() != 9) throw io_error("metrics row has " + std::to_string(parts.size()) + " fields");
    r.dataset = parts[0];
    r.teacher = parts[1];
    r.method = parts[2];
    r.setting = parts[3];
    r.seed = std::stoull(parts[4]);
    r.test_acc = std::stod(parts[5]);
    r.val_acc = std::stod(parts[6]);
    r.epochs = std::stoi(parts[7]);
    r.seconds = std::stod(parts[8]);
    return r;
}

// One aggregated row per (dataset, teacher, method, setting), sorted by
// key for reproducible output.
inline std::string emit_report(const std::vector<RunRecord>& records) {
    std::map<std::string, std::vector<double>> groups;
    for (const RunRecord& r : records)
        groups[r.dataset + "," + r.teacher + "," + r.method + "," + r.setting].push_back(r.test_acc);
    std::string out = "dataset,teacher,method,setting,mean_test_acc,std_test_acc,n,report\n";
    for (const auto& [key, vals] : groups) {
        const Aggregate a = aggregate(vals);
        char buf[128];
        std::snprintf(buf, sizeof(buf), ",%.6f,%.6f,%d,%s\n", a.mean, a.stddev, a.n,
                      format_mean_std(a.mean, a.stddev).c_str());
        out += key + buf;
    }
    return out;
}

// Sweep table: x ascending, one row per (x, method).
struct SweepPoint {
    double x;
    std::string method;
    double mean, stddev;
    int n;
};

inline std::string emit_sweep_csv(const std::string& x_name, std::vector<SweepPoint> points) {
    std::sort(points.begin(), points.end(), [](const SweepPoint& a, const SweepPoint& b) {
        return a.x != b.x ? a.x < b.x : a.method < b.method;
    });
    std::string out = x_name + ",method,mean_test_acc,std_test_acc,n\n";
    for (const auto& p : points) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%g,%s,%.6f,%.6f,%d\n", p.x, p.method.c_str(), p.mean, p.stddev,
                      p.n);
        out += buf;
    }
    return out;
}

}  // namespace kmp
