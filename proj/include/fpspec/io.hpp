#ifndef FPSPEC_IO_HPP
#define FPSPEC_IO_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "fpspec/grid.hpp"
#include "fpspec/spectra.hpp"

namespace fpspec {

/// Insertion-ordered JSON value with doubles printed at 17 significant
/// digits; report files must be byte-stable for identical inputs.
class JVal {
public:
    JVal() : type_(Type::Null) {}
    JVal(bool b) : type_(Type::Bool), bool_(b) {}
    JVal(int v) : type_(Type::Int), int_(v) {}
    JVal(long v) : type_(Type::Int), int_(v) {}
    JVal(long long v) : type_(Type::Int), int_(v) {}
    JVal(std::uint64_t v) : type_(Type::Int), int_(static_cast<long long>(v)) {}
    JVal(double v) : type_(Type::Dbl), dbl_(v) {}
    JVal(const char* s) : type_(Type::Str), str_(s) {}
    JVal(std::string s) : type_(Type::Str), str_(std::move(s)) {}

    static JVal object() { JVal v; v.type_ = Type::Obj; return v; }
    static JVal array() { JVal v; v.type_ = Type::Arr; return v; }

    JVal& set(const std::string& key, JVal v);
    JVal& push(JVal v);
    std::string dump(int indent = 2) const;

private:
    enum class Type { Null, Bool, Int, Dbl, Str, Arr, Obj };
    Type type_;
    bool bool_ = false;
    long long int_ = 0;
    double dbl_ = 0;
    std::string str_;
    std::vector<JVal> arr_;
    std::vector<std::pair<std::string, JVal>> obj_;

    void write(std::string& out, int indent, int depth) const;
};

void writeTextFile(const std::string& path, const std::string& content);

/// Configuration error carrying a JSON pointer to the offending key.
struct ConfigError : std::runtime_error {
    std::string pointer;
    ConfigError(std::string ptr, const std::string& what)
        : std::runtime_error(what + " (at " + ptr + ")"), pointer(std::move(ptr)) {}
};

struct RunConfig {
    int schemaVersion = 1;
    GridSpec grid;
    Eigen::MatrixXd metricMatrix;  // resolved g^{ij}
    std::string flowName;          // empty when flowCsv set
    std::map<std::string, double> flowParams;
    std::string flowCsv;
    Tolerances tol;

    std::vector<double> tList{0.5, 1.0, 2.0};
    double tGridMax = 4.0;
    int tGridPoints = 60;
    long samples = 100000;
    std::uint64_t seed = 1;
    int threads = 1;
    double dt = 1e-2;
    double evolveT = 10.0;
    std::string evolveInitKind = "gaussian";
    std::array<double, 2> evolveInitCenter{0.0, 0.0};
    double evolveInitSigma = 1.0;
    int mcSteps = 500;
    int noiseDraws = 20;
    double nicolaiT = 1.0;
    double nicolaiDt = 0.0;  // 0 = from the stability bound
    int scanResolution = 10000;
    std::vector<double> thetaSweep;
    std::string eigMode = "dense";
    int eigK = 24;
    double eigShift = -1e-3;
    unsigned knownAxes = 2u;  // cpd: "y"
    std::string observable1 = "exp_miphi";
    std::string observable2 = "exp_iphi";
    std::string outputDir = "out";
};

/// Parses and validates a config document. Throws ConfigError with a JSON
/// pointer for schema violations.
RunConfig parseConfig(const std::string& path);
RunConfig parseConfigText(const std::string& text);

double theta(const RunConfig& cfg);

}  // namespace fpspec

#endif
