from altphillips.cli import main

main()
