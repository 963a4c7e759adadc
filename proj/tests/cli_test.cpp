#include <gtest/gtest.h>
TEST(Pending, Placeholder) { GTEST_SKIP() << "module under construction"; }
