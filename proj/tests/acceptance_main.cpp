#include <cstdio>
#include <iostream>

#include "fpspec/acceptance.hpp"

int main() {
    const auto results = fpspec::runAcceptance("acceptance_out", 1, std::cout);
    int failed = 0;
    for (const auto& r : results)
        if (!r.pass) ++failed;
    std::printf("acceptance: %d/%zu criteria passed\n", static_cast<int>(results.size()) - failed,
                results.size());
    return failed == 0 ? 0 : 1;
}
