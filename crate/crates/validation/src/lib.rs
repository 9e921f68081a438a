//! Holds the `acceptance` test target. It runs after the other test suites
//! so an unmet criterion does not stop them from running.
