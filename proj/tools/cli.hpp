#pragma once

namespace curricula::cli {

int run(int argc, char** argv);

} // namespace curricula::cli
