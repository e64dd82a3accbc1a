from myller_geometry.cli.main import main

main()
