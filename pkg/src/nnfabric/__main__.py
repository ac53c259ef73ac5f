from nnfabric.cli import main

main()
