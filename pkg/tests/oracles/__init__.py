"""Independent reference computations used to freeze golden files.

Each module reimplements one contract with flat, obvious code (raw JSON
counting, hand-rolled sums, explicit shuffles) and never imports the
package under test. Golden fixtures are produced by running these modules
and committing the output.
"""
