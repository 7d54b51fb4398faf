from lrw.cli import main

main()
