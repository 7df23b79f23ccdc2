#include <hilsim/runtime.hpp>

#include <cstdio>

int main() {
    hilsim::RunConfig rc;
    hilsim::Runtime rt(rc);
    rt.start();
    rt.set_rpm(1500.0);
    const auto batch = rt.step(480);
    std::printf("%zu\n", batch.n);
    return batch.n == 480 ? 0 : 1;
}
